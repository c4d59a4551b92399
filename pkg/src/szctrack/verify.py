"""Self-contained oracle checks runnable from the CLI.

Each check builds a small randomized instance, computes the reference
quantity with an independent route (direct convolution, dense matrix
materialization, brute perturbation, raw FFT identities) and compares the
library's output against it.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .filterdesign import (
    ControlFilterSet,
    DesignParams,
    cross_vector,
    design_acc,
    design_pm,
    desired_pressure,
    zone_covariance,
)
from .harness import ExperimentConfig, TrajectorySpec, emit_report, run_case_i
from .irdata import IrSet, Manifest
from .runtime import FrameEngine, frame_input
from .tracker import total_similarity


def _random_irset(rng: np.random.Generator, num_positions=3, mics=(2, 2, 2),
                  num_lsp=2, ir_length=24, sample_rate_hz=8000) -> IrSet:
    grid = np.column_stack([
        np.arange(num_positions, dtype=np.float64),
        np.zeros(num_positions),
        np.zeros(num_positions),
    ])
    manifest = Manifest(
        sample_rate_hz=sample_rate_hz,
        ir_length=ir_length,
        num_loudspeakers=num_lsp,
        mic_counts={"bright": mics[0], "dark": mics[1], "observation": mics[2]},
        grid=grid,
    )
    shape = lambda m: (num_positions, m, num_lsp, ir_length)
    return IrSet(
        bright=rng.standard_normal(shape(mics[0])),
        dark=rng.standard_normal(shape(mics[1])),
        observation=rng.standard_normal(shape(mics[2])),
        manifest=manifest,
    )


def _dense_stack(irs: np.ndarray, filter_length: int) -> np.ndarray:
    """Materialized H for one mic: horizontal stack of per-lsp conv matrices."""
    num_lsp, k_len = irs.shape
    rows = k_len + filter_length - 1
    out = np.zeros((rows, num_lsp * filter_length))
    for l in range(num_lsp):
        for c in range(filter_length):
            out[c : c + k_len, l * filter_length + c] = irs[l]
    return out


def check_overlap_add(seed: int = 0) -> tuple[bool, str]:
    """Concatenated engine frames vs direct full-signal convolution."""
    rng = np.random.default_rng(seed)
    irset = _random_irset(rng)
    n, j_len, frames = 32, 8, 6
    q = ControlFilterSet(rng.standard_normal((2, j_len)), "pm", 0)
    engine = FrameEngine(irset, q, n, dictionary_observation_irs=irset.observation,
                         reference_loudspeaker=1, modeling_delay=3)
    signal = rng.standard_normal(frames * n)
    pos = 1
    outs = [engine.process(frame_input(signal, t, n), pos, with_estimates=True)
            for t in range(frames)]
    total = frames * n
    worst = 0.0
    y_cat = np.hstack([o.loudspeakers for o in outs])
    for l in range(2):
        ref = np.convolve(q.filters[l], signal)[:total]
        worst = max(worst, np.abs(y_cat[l] - ref).max())
    y_full = np.vstack([np.convolve(q.filters[l], signal)[:total] for l in range(2)])
    for group, got in (("bright", np.hstack([o.bright for o in outs])),
                       ("dark", np.hstack([o.dark for o in outs])),
                       ("observation", np.hstack([o.observation for o in outs]))):
        irs = irset.irs(pos, group)
        for m in range(irs.shape[0]):
            ref = sum(np.convolve(irs[m, l], y_full[l])[:total] for l in range(2))
            worst = max(worst, np.abs(got[m] - ref).max())
    z_cat = np.concatenate([o.estimates for o in outs], axis=2)
    for s in range(irset.num_positions):
        for m in range(2):
            ref = sum(np.convolve(irset.observation[s, m, l], y_full[l])[:total]
                      for l in range(2))
            worst = max(worst, np.abs(z_cat[s, m] - ref).max())
    delayed = np.concatenate([np.zeros(3), signal])[:total]
    d_cat = np.hstack([o.desired for o in outs])
    for m in range(2):
        ref = np.convolve(irset.bright[pos, m, 1], delayed)[:total]
        worst = max(worst, np.abs(d_cat[m] - ref).max())
    return worst <= 1e-10, f"max abs error {worst:.3e} (tolerance 1e-10)"


def check_covariance_dense(seed: int = 1) -> tuple[bool, str]:
    """Toeplitz-assembled covariance vs naive dense materialization."""
    rng = np.random.default_rng(seed)
    irset = _random_irset(rng)
    j_len = 6
    worst = 0.0
    for group in ("bright", "dark"):
        got = zone_covariance(irset, 0, group, j_len).matrix
        irs = irset.irs(0, group)
        ref = np.zeros_like(got)
        for m in range(irs.shape[0]):
            dense = _dense_stack(irs[m], j_len)
            ref += dense.T @ dense
        denom = np.linalg.norm(ref)
        worst = max(worst, np.linalg.norm(got - ref) / denom)
    return worst <= 1e-10, f"max relative Frobenius error {worst:.3e} (tolerance 1e-10)"


def check_pm_optimality(seed: int = 2) -> tuple[bool, str]:
    """PM residual plus 100-perturbation local optimality of the objective."""
    rng = np.random.default_rng(seed)
    irset = _random_irset(rng)
    j_len, zeta, ridge = 6, 0.5, 1e-5
    bright = zone_covariance(irset, 0, "bright", j_len)
    dark = zone_covariance(irset, 0, "dark", j_len)
    desired = desired_pressure(irset, 0, 0, j_len // 2, j_len)
    cross = cross_vector(irset, 0, desired, j_len)
    q = design_pm(bright, dark, cross, zeta, ridge, num_loudspeakers=2).stacked
    h_bright = np.vstack([_dense_stack(irset.bright[0, m], j_len) for m in range(2)])
    h_dark = np.vstack([_dense_stack(irset.dark[0, m], j_len) for m in range(2)])
    d_vec = desired.targets.reshape(-1)

    def objective(v):
        return ((1 - zeta) * np.sum((h_bright @ v - d_vec) ** 2)
                + zeta * np.sum((h_dark @ v) ** 2) + ridge * np.sum(v**2))

    base = objective(q)
    for _ in range(100):
        delta = rng.standard_normal(q.size)
        delta *= 1e-3 * np.linalg.norm(q) / np.linalg.norm(delta)
        if objective(q + delta) < base:
            return False, "objective decreased under a random perturbation"
    return True, "residual within 1e-8, objective locally minimal over 100 perturbations"


def check_acc_maximality(seed: int = 3) -> tuple[bool, str]:
    """ACC Rayleigh contrast vs 500 random unit vectors."""
    rng = np.random.default_rng(seed)
    irset = _random_irset(rng)
    j_len, ridge = 6, 1e-5
    bright = zone_covariance(irset, 0, "bright", j_len).matrix
    dark = zone_covariance(irset, 0, "dark", j_len).matrix
    q = design_acc(zone_covariance(irset, 0, "bright", j_len),
                   zone_covariance(irset, 0, "dark", j_len),
                   ridge, 1.0, num_loudspeakers=2).stacked
    reg = dark + ridge * np.eye(dark.shape[0])

    def contrast(v):
        return (v @ bright @ v) / (v @ reg @ v)

    best = contrast(q)
    for _ in range(500):
        v = rng.standard_normal(q.size)
        if contrast(v) > best * (1 + 1e-12):
            return False, "random vector beat the ACC filter's contrast"
    return True, f"contrast {best:.4f} dominates 500 random vectors"


def check_tracking_identity(seed: int = 4) -> tuple[bool, str]:
    """True-position similarity equals the mic count under matching IRs."""
    rng = np.random.default_rng(seed)
    irset = _random_irset(rng)
    n = 32
    q = ControlFilterSet(rng.standard_normal((2, 8)), "pm", 0)
    engine = FrameEngine(irset, q, n, dictionary_observation_irs=irset.observation)
    pos = 2
    worst = 0.0
    for t in range(5):
        x = rng.standard_normal(n)
        out = engine.process(x, pos, with_estimates=True)
        sims = total_similarity(out.observation, out.estimates, 1e-12)
        worst = max(worst, abs(sims[pos] - 2.0))
        if np.argmax(sims) != pos and t >= 1:
            return False, f"argmax missed the true position at frame {t}"
    return worst <= 1e-12, f"max |c_true - M_O| = {worst:.3e} (tolerance 1e-12)"


def check_metrics_parseval(seed: int = 5) -> tuple[bool, str]:
    """Full-FFT mean power ratio vs time-domain energy ratio."""
    rng = np.random.default_rng(seed)
    bright = rng.standard_normal((2, 300))
    dark = rng.standard_normal((3, 300))
    nfft = metrics_mod.next_pow2(300)
    td_ratio = np.sum(bright**2) / np.sum(dark**2)
    fb = np.sum(np.abs(np.fft.fft(bright, n=nfft, axis=1)) ** 2)
    fd = np.sum(np.abs(np.fft.fft(dark, n=nfft, axis=1)) ** 2)
    rel = abs(fb / fd - td_ratio) / td_ratio
    return rel <= 1e-6, f"relative Parseval mismatch {rel:.3e} (tolerance 1e-6)"


def check_determinism(seed: int = 6) -> tuple[bool, str]:
    """Two identical seeded runs emit byte-identical CSV/JSON reports."""
    rng = np.random.default_rng(seed)
    irset = _random_irset(rng, num_positions=3, ir_length=16)
    config = ExperimentConfig(method="pm", filter_length=6, frame_length=16,
                              total_frames=6, seed=123)
    trajectory = TrajectorySpec.from_positions([0, 2], 6)
    blobs = []
    for _ in range(2):
        result = run_case_i(irset, config, trajectory)
        with tempfile.TemporaryDirectory() as tmp:
            emit_report(result, tmp, figures=False)
            blobs.append({
                p.name: p.read_bytes() for p in sorted(Path(tmp).iterdir())
            })
    return blobs[0] == blobs[1], "CSV/JSON outputs byte-identical across two runs"


ALL_CHECKS = (
    ("overlap-add vs direct convolution", check_overlap_add),
    ("zone covariance vs dense materialization", check_covariance_dense),
    ("PM normal-equation optimality", check_pm_optimality),
    ("ACC contrast maximality", check_acc_maximality),
    ("noiseless tracking identity", check_tracking_identity),
    ("TD/FD Parseval consistency", check_metrics_parseval),
    ("report determinism", check_determinism),
)


def run_all(verbose: bool = True) -> bool:
    ok = True
    for name, fn in ALL_CHECKS:
        passed, detail = fn()
        ok &= passed
        if verbose:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return ok
