"""Experiment orchestration: schemes, trajectories, Case I / Case II runs.

Four deployment schemes share every run's input signal and trajectory:

* ``proposed``  - audio-only tracking; starts from the mix-data filter and
  switches to the selected dictionary position's filter each frame.
* ``mix``       - the position-averaged filter, fixed throughout.
* ``start_pos`` - the start position's optimal filter, fixed throughout.
* ``optimal``   - the true position's filter, switched instantly at changes
  (upper performance bound).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .filterdesign import (
    ControlFilterSet,
    DesignParams,
    FilterDictionary,
    build_dictionaries,
    design_mix,
)
from .irdata import IrSet, subset_positions
from .runtime import FrameEngine, frame_input
from .signals import make_input
from .tracker import (
    TrackerDecision,
    default_silence_threshold,
    select_position,
    total_similarity,
    update_filters,
)

SCHEMES = ("proposed", "mix", "start_pos", "optimal")


@dataclass(frozen=True)
class TrajectorySpec:
    """Ordered (position, duration-in-frames) segments."""

    segments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        segs = tuple((int(p), int(d)) for p, d in self.segments)
        for _, duration in segs:
            if duration < 1:
                raise ValueError("segment durations must be >= 1 frame")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def from_positions(cls, positions, total_frames: int) -> "TrajectorySpec":
        """Equal-interval segments; any remainder extends the last one."""
        positions = list(positions)
        if total_frames < len(positions):
            raise ValueError("total_frames must cover every position at least once")
        base = total_frames // len(positions)
        durations = [base] * len(positions)
        durations[-1] += total_frames - base * len(positions)
        return cls(tuple(zip(positions, durations)))

    @property
    def total_frames(self) -> int:
        return sum(d for _, d in self.segments)

    def position_at(self, frame: int) -> int:
        if frame < 0:
            raise ValueError("frame index must be non-negative")
        acc = 0
        for pos, dur in self.segments:
            acc += dur
            if frame < acc:
                return pos
        return self.segments[-1][0]

    def changes(self) -> list[tuple[int, int]]:
        """(frame, new position) for every switch after the start segment."""
        out = []
        acc = 0
        for i, (pos, dur) in enumerate(self.segments):
            if i > 0:
                out.append((acc, pos))
            acc += dur
        return out

    def positions_per_frame(self) -> list[int]:
        return [self.position_at(t) for t in range(self.total_frames)]


def load_trajectory(path: str | Path) -> TrajectorySpec:
    """Trajectory JSON: {"segments": [[pos, frames], ...]} or
    {"positions": [...], "total_frames": T}."""
    obj = json.loads(Path(path).read_text())
    if "segments" in obj:
        return TrajectorySpec(tuple((int(p), int(d)) for p, d in obj["segments"]))
    return TrajectorySpec.from_positions(obj["positions"], int(obj["total_frames"]))


def default_trajectory_positions(num_positions: int) -> tuple[int, ...]:
    """Spread 4-stop preset: corner, far corner, center, off-center."""
    if num_positions == 1:
        return (0,)
    picks = [0, num_positions - 1, num_positions // 2, (2 * num_positions) // 3]
    seen: list[int] = []
    for p in picks:
        if p not in seen:
            seen.append(p)
    return tuple(seen)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs beyond the IR set itself."""

    method: str = "pm"  # "acc" | "pm"
    schemes: tuple[str, ...] = SCHEMES
    filter_length: int = 32
    ridge: float = 1e-5
    zeta: float = 0.5
    reference_loudspeaker: int = 1
    modeling_delay: int | None = None
    frame_length: int = 256
    total_frames: int = 40
    input_kind: str = "noise"
    input_path: str | None = None
    seed: int = 0
    dictionary_positions: tuple[int, ...] | None = None
    monte_carlo_iterations: int = 50
    silence_threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.dictionary_positions is not None:
            object.__setattr__(self, "dictionary_positions",
                               tuple(int(i) for i in self.dictionary_positions))
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ValueError(f"unknown scheme '{scheme}'")
        if self.monte_carlo_iterations < 1:
            raise ValueError("monte_carlo_iterations must be >= 1")
        if self.total_frames < 1:
            raise ValueError("total_frames must be >= 1")

    def design_params(self) -> DesignParams:
        return DesignParams(
            method=self.method,
            filter_length=self.filter_length,
            ridge=self.ridge,
            zeta=self.zeta,
            reference_loudspeaker=self.reference_loudspeaker,
            modeling_delay=self.modeling_delay,
        )

    def silence(self) -> float:
        if self.silence_threshold is not None:
            return self.silence_threshold
        return default_silence_threshold(self.frame_length)

    def echo(self) -> dict:
        out = asdict(self)
        out["schemes"] = list(self.schemes)
        if self.dictionary_positions is not None:
            out["dictionary_positions"] = list(self.dictionary_positions)
        return out


@dataclass
class DesignBundle:
    """Filters a run needs: the dictionary, the mix filter and per-position
    optimal filters over the full grid."""

    params: DesignParams
    dictionary: FilterDictionary
    dictionary_ids: tuple[int, ...]
    observation_irs: np.ndarray  # (S_dict, M_O, L, K)
    mix: ControlFilterSet
    position_filters: FilterDictionary  # full grid, indexed by true position id


def build_design_bundle(true_irset: IrSet, config: ExperimentConfig) -> DesignBundle:
    params = config.design_params()
    full_dict, full_obs = build_dictionaries(true_irset, params)
    ids = config.dictionary_positions
    if ids is None or tuple(ids) == tuple(range(true_irset.num_positions)):
        dictionary, obs_irs = full_dict, full_obs
        mix = design_mix(true_irset, params)
        dict_ids = tuple(range(true_irset.num_positions))
    else:
        sub = subset_positions(true_irset, list(ids))
        dictionary, obs_irs = build_dictionaries(sub, params)
        mix = design_mix(sub, params)
        dict_ids = tuple(int(i) for i in ids)
    return DesignBundle(
        params=params,
        dictionary=dictionary,
        dictionary_ids=dict_ids,
        observation_irs=obs_irs,
        mix=mix,
        position_filters=full_dict,
    )


@dataclass
class SchemeResult:
    scheme: str
    metrics: metrics_mod.MetricsSeries
    input_digest: str
    trace: list[TrackerDecision] | None = None
    lock_latencies: list[int | None] | None = None
    signals: dict[str, np.ndarray] | None = None


def _signal_digest(signal: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(signal, dtype=np.float64).tobytes()).hexdigest()


def run_scheme(scheme: str, signal: np.ndarray, trajectory: TrajectorySpec,
               true_irset: IrSet, bundle: DesignBundle, config: ExperimentConfig,
               keep_signals: bool = False) -> SchemeResult:
    """Run one scheme's full frame loop and compute its metrics."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme '{scheme}'")
    n = config.frame_length
    total = trajectory.total_frames
    manifest = true_irset.manifest
    eps = config.silence()
    start_pos = trajectory.segments[0][0]
    if scheme in ("proposed", "mix"):
        initial = bundle.mix
    else:
        initial = bundle.position_filters[start_pos]
    engine = FrameEngine(
        true_irset,
        initial,
        n,
        dictionary_observation_irs=bundle.observation_irs if scheme == "proposed" else None,
        reference_loudspeaker=config.reference_loudspeaker,
        modeling_delay=bundle.params.delay,
    )
    td_ac_vals = np.empty(total)
    td_nsdp_vals = np.empty(total)
    bright_all = np.zeros((manifest.mic_counts["bright"], total * n))
    dark_all = np.zeros((manifest.mic_counts["dark"], total * n))
    obs_all = np.zeros((manifest.mic_counts["observation"], total * n))
    desired_all = np.zeros((manifest.mic_counts["bright"], total * n))
    lsp_all = np.zeros((manifest.num_loudspeakers, total * n)) if keep_signals else None
    trace: list[TrackerDecision] = []
    last_selected: int | None = None
    for tau in range(total):
        pos = trajectory.position_at(tau)
        if scheme == "optimal":
            engine.set_active_filter(bundle.position_filters[pos])
        x = frame_input(signal, tau, n)
        lsp = engine.apply_filters(x)
        bright, dark, observed = engine.propagate_true(lsp, pos)
        desired = engine.desired_frames(x, pos)
        if scheme == "proposed":
            estimates = engine.estimate_observations(lsp)
            sims = total_similarity(observed, estimates, eps)
            decision = select_position(
                sims, previous=last_selected if last_selected is not None else 0,
                frame_index=tau,
            )
            trace.append(decision)
            if not (decision.held_previous and last_selected is None):
                update_filters(decision, bundle.dictionary, engine)
                last_selected = decision.selected
        td_ac_vals[tau] = metrics_mod.td_ac(bright, dark)
        td_nsdp_vals[tau] = metrics_mod.td_nsdp(bright, desired)
        sl = slice(tau * n, (tau + 1) * n)
        bright_all[:, sl] = bright
        dark_all[:, sl] = dark
        obs_all[:, sl] = observed
        desired_all[:, sl] = desired
        if lsp_all is not None:
            lsp_all[:, sl] = lsp
    fs = manifest.sample_rate_hz
    freqs, fd_ac_vals = metrics_mod.fd_ac(bright_all, dark_all, fs)
    _, fd_nsdp_vals = metrics_mod.fd_nsdp(bright_all, desired_all, fs)
    series = metrics_mod.MetricsSeries(
        td_ac_db=td_ac_vals,
        td_nsdp_db=td_nsdp_vals,
        fd_freqs_hz=freqs,
        fd_ac_db=fd_ac_vals,
        fd_nsdp_db=fd_nsdp_vals,
    )
    result = SchemeResult(scheme=scheme, metrics=series, input_digest=_signal_digest(signal))
    if scheme == "proposed":
        result.trace = trace
        result.lock_latencies = _lock_latencies(trace, trajectory, bundle.dictionary_ids)
    if keep_signals:
        result.signals = {
            "loudspeakers": lsp_all,
            "bright": bright_all,
            "dark": dark_all,
            "observation": obs_all,
            "desired": desired_all,
        }
    return result


def _lock_latencies(trace: list[TrackerDecision], trajectory: TrajectorySpec,
                    dictionary_ids: tuple[int, ...]) -> list[int | None]:
    """Frames until the tracker selects the new true position, per change.

    None when the position never locks within its segment or is absent from
    the dictionary (latency undefined).
    """
    out: list[int | None] = []
    changes = trajectory.changes()
    for idx, (change_frame, position) in enumerate(changes):
        if position not in dictionary_ids:
            out.append(None)
            continue
        segment_end = changes[idx + 1][0] if idx + 1 < len(changes) else trajectory.total_frames
        latency = None
        for tau in range(change_frame, segment_end):
            if dictionary_ids[trace[tau].selected] == position:
                latency = tau - change_frame + 1
                break
        out.append(latency)
    return out


@dataclass
class ExperimentResult:
    """Everything emit_report needs, for a single run or an MC aggregate."""

    case: str  # "i" | "ii"
    method: str
    config_echo: dict
    scheme_metrics: dict[str, metrics_mod.MetricsSeries]
    tracker_traces: list[tuple[int | None, list[TrackerDecision]]]
    lock_latencies: list[dict]
    trajectories: list[list[list[int]]]
    input_digests: list[str]
    dictionary_ids: tuple[int, ...]
    change_frames: tuple[int, ...]
    sample_rate_hz: int
    frame_length: int
    true_positions: list[int] | None = None
    scheme_results: dict[str, SchemeResult] | None = None


def run_case_i(true_irset: IrSet, config: ExperimentConfig,
               trajectory: TrajectorySpec | None = None,
               keep_signals: bool = False) -> ExperimentResult:
    """Full-grid-dictionary run over a fixed trajectory, all configured schemes."""
    full = tuple(range(true_irset.num_positions))
    if config.dictionary_positions is not None and tuple(config.dictionary_positions) != full:
        raise ValueError("case i uses the full grid as dictionary; drop the subset")
    if trajectory is None:
        trajectory = TrajectorySpec.from_positions(
            default_trajectory_positions(true_irset.num_positions), config.total_frames
        )
    for pos, _ in trajectory.segments:
        true_irset.check_position(pos)
    bundle = build_design_bundle(true_irset, config)
    fs = true_irset.manifest.sample_rate_hz
    signal = make_input(config.input_kind, trajectory.total_frames * config.frame_length,
                        fs, [config.seed, 0], config.input_path)
    results: dict[str, SchemeResult] = {}
    for scheme in config.schemes:
        results[scheme] = run_scheme(scheme, signal, trajectory, true_irset, bundle,
                                     config, keep_signals=keep_signals)
    digests = {r.input_digest for r in results.values()}
    if len(digests) != 1:
        raise RuntimeError("schemes consumed different input signals")
    latencies = []
    if "proposed" in results:
        for (frame, position), latency in zip(trajectory.changes(),
                                              results["proposed"].lock_latencies):
            latencies.append({
                "iteration": None,
                "change_frame": frame,
                "position": position,
                "latency": latency,
            })
    return ExperimentResult(
        case="i",
        method=config.method,
        config_echo=config.echo(),
        scheme_metrics={s: r.metrics for s, r in results.items()},
        tracker_traces=[(None, results["proposed"].trace)] if "proposed" in results else [],
        lock_latencies=latencies,
        trajectories=[[list(seg) for seg in trajectory.segments]],
        input_digests=[next(iter(digests))],
        dictionary_ids=bundle.dictionary_ids,
        change_frames=tuple(f for f, _ in trajectory.changes()),
        sample_rate_hz=fs,
        frame_length=config.frame_length,
        true_positions=trajectory.positions_per_frame(),
        scheme_results=results,
    )


def sample_trajectory(num_positions: int, num_stops: int, total_frames: int,
                      rng: np.random.Generator) -> TrajectorySpec:
    """Uniform without-replacement stops at equal frame intervals."""
    if num_stops > num_positions:
        raise ValueError("cannot sample more distinct stops than grid positions")
    picks = rng.choice(num_positions, size=num_stops, replace=False)
    return TrajectorySpec.from_positions([int(p) for p in picks], total_frames)


def run_case_ii(true_irset: IrSet, config: ExperimentConfig) -> ExperimentResult:
    """Monte-Carlo runs with a subset dictionary; metrics averaged frame-aligned.

    Trajectories are 4 stops (start + 3 changes) sampled uniformly without
    replacement from the full grid; the start-position scheme always gets the
    optimal filter of the sampled start, even when it is outside the subset.
    """
    if config.dictionary_positions is None:
        # every other grid id; the checkerboard pattern for odd grid widths
        config = replace(config,
                         dictionary_positions=tuple(range(0, true_irset.num_positions, 2)))
    bundle = build_design_bundle(true_irset, config)
    fs = true_irset.manifest.sample_rate_hz
    num_iters = config.monte_carlo_iterations
    sums: dict[str, dict[str, np.ndarray]] = {}
    freqs = None
    traces: list[tuple[int | None, list[TrackerDecision]]] = []
    latencies: list[dict] = []
    trajectories = []
    digests = []
    change_frames: tuple[int, ...] = ()
    for it in range(num_iters):
        rng = np.random.default_rng([config.seed, it, 1])
        trajectory = sample_trajectory(true_irset.num_positions, 4, config.total_frames, rng)
        change_frames = tuple(f for f, _ in trajectory.changes())
        signal = make_input(config.input_kind, trajectory.total_frames * config.frame_length,
                            fs, [config.seed, it, 2], config.input_path)
        trajectories.append([list(seg) for seg in trajectory.segments])
        iter_digests = set()
        for scheme in config.schemes:
            res = run_scheme(scheme, signal, trajectory, true_irset, bundle, config)
            iter_digests.add(res.input_digest)
            acc = sums.setdefault(scheme, {
                "td_ac": np.zeros(trajectory.total_frames),
                "td_nsdp": np.zeros(trajectory.total_frames),
                "fd_ac": np.zeros(res.metrics.fd_ac_db.size),
                "fd_nsdp": np.zeros(res.metrics.fd_nsdp_db.size),
            })
            acc["td_ac"] += res.metrics.td_ac_db
            acc["td_nsdp"] += res.metrics.td_nsdp_db
            acc["fd_ac"] += res.metrics.fd_ac_db
            acc["fd_nsdp"] += res.metrics.fd_nsdp_db
            freqs = res.metrics.fd_freqs_hz
            if scheme == "proposed":
                traces.append((it, res.trace))
                for (frame, position), latency in zip(trajectory.changes(),
                                                      res.lock_latencies):
                    latencies.append({
                        "iteration": it,
                        "change_frame": frame,
                        "position": position,
                        "latency": latency,
                    })
        if len(iter_digests) != 1:
            raise RuntimeError("schemes consumed different input signals")
        digests.append(next(iter(iter_digests)))
    scheme_metrics = {
        scheme: metrics_mod.MetricsSeries(
            td_ac_db=acc["td_ac"] / num_iters,
            td_nsdp_db=acc["td_nsdp"] / num_iters,
            fd_freqs_hz=freqs,
            fd_ac_db=acc["fd_ac"] / num_iters,
            fd_nsdp_db=acc["fd_nsdp"] / num_iters,
        )
        for scheme, acc in sums.items()
    }
    return ExperimentResult(
        case="ii",
        method=config.method,
        config_echo=config.echo(),
        scheme_metrics=scheme_metrics,
        tracker_traces=traces,
        lock_latencies=latencies,
        trajectories=trajectories,
        input_digests=digests,
        dictionary_ids=bundle.dictionary_ids,
        change_frames=change_frames,
        sample_rate_hz=fs,
        frame_length=config.frame_length,
    )


def _fmt(value: float) -> str:
    return str(float(value))


def emit_report(result: ExperimentResult, out_dir: str | Path,
                figures: bool = True, dump_frames: str | Path | None = None) -> None:
    """Write td_metrics.csv, fd_metrics.csv, tracker_trace.csv, summary.json
    and (optionally) rendered figures next to them."""
    import csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "td_metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tau", "td_ac_db", "td_nsdp_db", "scheme", "method"])
        for scheme, series in result.scheme_metrics.items():
            for tau in range(series.td_ac_db.size):
                writer.writerow([tau, _fmt(series.td_ac_db[tau]),
                                 _fmt(series.td_nsdp_db[tau]), scheme, result.method])
    with open(out / "fd_metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["freq_hz", "fd_ac_db", "fd_nsdp_db", "scheme", "method"])
        for scheme, series in result.scheme_metrics.items():
            for b in range(series.fd_freqs_hz.size):
                writer.writerow([_fmt(series.fd_freqs_hz[b]), _fmt(series.fd_ac_db[b]),
                                 _fmt(series.fd_nsdp_db[b]), scheme, result.method])
    if result.tracker_traces:
        num_dict = len(result.dictionary_ids)
        with open(out / "tracker_trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["tau", "selected", "held_previous"] + [f"c_{s}" for s in range(num_dict)]
            if result.case == "ii":
                header = ["iteration"] + header
            writer.writerow(header)
            for iteration, trace in result.tracker_traces:
                for decision in trace:
                    row = [decision.frame_index, decision.selected,
                           int(decision.held_previous)]
                    row += [_fmt(v) for v in decision.similarities]
                    if result.case == "ii":
                        row = [iteration] + row
                    writer.writerow(row)
    summary = {
        "case": result.case,
        "method": result.method,
        "config": result.config_echo,
        "input_digests": result.input_digests,
        "dictionary_positions": list(result.dictionary_ids),
        "trajectories": result.trajectories,
        "change_frames": list(result.change_frames),
        "lock_latencies": result.lock_latencies,
        "schemes": {
            scheme: {
                "mean_td_ac_db": float(np.mean(series.td_ac_db)),
                "median_td_ac_db": float(np.median(series.td_ac_db)),
                "mean_td_nsdp_db": float(np.mean(series.td_nsdp_db)),
                "median_td_nsdp_db": float(np.median(series.td_nsdp_db)),
                "mean_fd_ac_db": float(np.mean(series.fd_ac_db)),
                "mean_fd_nsdp_db": float(np.mean(series.fd_nsdp_db)),
            }
            for scheme, series in result.scheme_metrics.items()
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if dump_frames is not None:
        _dump_signals(result, dump_frames)
    if figures:
        from . import report

        report.render_all(result, out)


def _dump_signals(result: ExperimentResult, dump_dir: str | Path) -> None:
    if result.scheme_results is None:
        raise ValueError("frame dumps are only available for single runs (case i)")
    dump = Path(dump_dir)
    dump.mkdir(parents=True, exist_ok=True)
    shapes: dict[str, dict] = {}
    for scheme, res in result.scheme_results.items():
        if res.signals is None:
            raise ValueError("run was executed without keep_signals; nothing to dump")
        for name, arr in res.signals.items():
            target = dump / f"{scheme}_{name}.f64"
            target.write_bytes(np.asarray(arr, dtype=np.float64).astype("<f8").tobytes())
            shapes[f"{scheme}_{name}"] = {
                "file": target.name,
                "shape": list(arr.shape),
                "frame_length": result.frame_length,
            }
    (dump / "frames_manifest.json").write_text(
        json.dumps(shapes, indent=2, sort_keys=True) + "\n"
    )
