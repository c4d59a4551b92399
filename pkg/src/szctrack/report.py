"""Render run metrics to PNG figures alongside the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ExperimentResult

SCHEME_STYLE = {
    "proposed": {"color": "tab:blue", "ls": "-"},
    "optimal": {"color": "tab:green", "ls": "--"},
    "mix": {"color": "tab:orange", "ls": "-."},
    "start_pos": {"color": "tab:red", "ls": ":"},
}


def _style(scheme: str) -> dict:
    return SCHEME_STYLE.get(scheme, {"color": "gray", "ls": "-"})


def render_td_figure(result: ExperimentResult, path: Path) -> None:
    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    frames = None
    for scheme, series in result.scheme_metrics.items():
        frames = np.arange(series.td_ac_db.size)
        axes[0].plot(frames, series.td_ac_db, label=scheme, lw=1.6, **_style(scheme))
        axes[1].plot(frames, series.td_nsdp_db, label=scheme, lw=1.6, **_style(scheme))
    for ax, label in zip(axes, ("TD AC [dB]", "TD nSDP [dB]")):
        for change in result.change_frames:
            ax.axvline(change, color="k", ls=":", alpha=0.5)
        ax.set_ylabel(label)
        ax.grid(True, ls="--", alpha=0.4)
    axes[0].legend(ncols=2, fontsize=9)
    axes[1].set_xlabel("frame")
    title = f"case {result.case.upper()} / {result.method.upper()}"
    if result.case == "ii":
        title += " (Monte-Carlo mean)"
    axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fd_figure(result: ExperimentResult, path: Path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for scheme, series in result.scheme_metrics.items():
        axes[0].semilogx(series.fd_freqs_hz, series.fd_ac_db, label=scheme,
                         lw=1.2, **_style(scheme))
        axes[1].semilogx(series.fd_freqs_hz, series.fd_nsdp_db, label=scheme,
                         lw=1.2, **_style(scheme))
    for ax, label in zip(axes, ("FD AC [dB]", "FD nSDP [dB]")):
        ax.set_xlabel("frequency [Hz]")
        ax.set_ylabel(label)
        ax.grid(True, which="both", ls="--", alpha=0.4)
    axes[0].legend(fontsize=9)
    fig.suptitle(f"case {result.case.upper()} / {result.method.upper()}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_tracker_figure(result: ExperimentResult, path: Path) -> None:
    if not result.tracker_traces:
        return
    iteration, trace = result.tracker_traces[0]
    frames = [d.frame_index for d in trace]
    selected_ids = [result.dictionary_ids[d.selected] for d in trace]
    sims = np.array([d.similarities for d in trace]).T  # (S, T)
    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    axes[0].step(frames, selected_ids, where="post", color="tab:blue", lw=1.6,
                 label="selected")
    if result.true_positions is not None:
        axes[0].step(frames, result.true_positions[: len(frames)], where="post",
                     color="k", ls="--", lw=1.2, label="true")
    axes[0].set_ylabel("grid position id")
    axes[0].grid(True, ls="--", alpha=0.4)
    axes[0].legend(fontsize=9)
    title = "tracker decisions"
    if iteration is not None:
        title += f" (iteration {iteration})"
    axes[0].set_title(title)
    im = axes[1].imshow(sims, aspect="auto", origin="lower", interpolation="nearest",
                        extent=(0, len(frames), -0.5, sims.shape[0] - 0.5))
    axes[1].set_yticks(range(sims.shape[0]))
    axes[1].set_yticklabels([str(i) for i in result.dictionary_ids])
    axes[1].set_ylabel("dictionary position")
    axes[1].set_xlabel("frame")
    fig.colorbar(im, ax=axes[1], label="total similarity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_all(result: ExperimentResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    render_td_figure(result, out / "td_metrics.png")
    render_fd_figure(result, out / "fd_metrics.png")
    render_tracker_figure(result, out / "tracker_trace.png")
