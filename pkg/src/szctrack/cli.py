"""Command line interface.

Subcommands: ``gen-scene`` (scene.json or preset -> IR set directory),
``design`` (IR set -> filter dictionary directory), ``run`` (Case I / II
experiments emitting CSV, JSON and figures) and ``verify`` (oracle suites).

Exit codes: 0 success, 2 validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import presets, verify
from .filterdesign import DesignParams, build_dictionaries, save_dictionary
from .harness import (
    ExperimentConfig,
    SCHEMES,
    TrajectorySpec,
    default_trajectory_positions,
    emit_report,
    load_trajectory,
    run_case_i,
    run_case_ii,
)
from .irdata import load_irset, save_irset
from .roomsim import build_scene_irset, load_scene, save_scene


def _parse_subset(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise ValueError(f"could not parse subset id list '{text}'") from exc


def _cmd_gen_scene(args) -> int:
    if args.scene is not None:
        room, geom = load_scene(args.scene)
    else:
        room, geom = presets.get_scene(args.preset)
    out = Path(args.out)
    irset = build_scene_irset(room, geom)
    save_irset(irset, out)
    save_scene(room, geom, out / "scene.json")
    print(f"wrote IR set with {irset.num_positions} positions to {out}")
    return 0


def _cmd_design(args) -> int:
    irset = load_irset(args.irset)
    params = DesignParams(
        method=args.method,
        filter_length=args.filter_len,
        ridge=args.ridge,
        zeta=args.zeta,
        reference_loudspeaker=args.lref,
        modeling_delay=args.delta,
    )
    dictionary, _ = build_dictionaries(irset, params)
    save_dictionary(dictionary, params, args.out)
    num_lsp, filt_len = dictionary.filter_shape
    print(f"wrote {len(dictionary)}-position {args.method} dictionary "
          f"({num_lsp} x {filt_len} taps) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    irset = load_irset(args.irset)
    schemes = SCHEMES if args.scheme == "all" else (args.scheme,)
    subset = _parse_subset(args.subset) if args.subset else None
    if args.case == "i" and subset is not None:
        raise ValueError("case i always uses the full grid; --subset applies to case ii")
    config = ExperimentConfig(
        method=args.method,
        schemes=schemes,
        filter_length=args.filter_len,
        ridge=args.ridge,
        zeta=args.zeta,
        reference_loudspeaker=args.lref,
        modeling_delay=args.delta,
        frame_length=args.frame_len,
        total_frames=args.frames,
        input_kind=args.input,
        input_path=args.input_file,
        seed=args.seed,
        dictionary_positions=subset,
        monte_carlo_iterations=args.mc,
    )
    if args.case == "i":
        if args.traj == "preset":
            trajectory = TrajectorySpec.from_positions(
                default_trajectory_positions(irset.num_positions), config.total_frames
            )
        else:
            trajectory = load_trajectory(args.traj)
        result = run_case_i(irset, config, trajectory,
                            keep_signals=args.dump_frames is not None)
    else:
        if args.dump_frames is not None:
            raise ValueError("--dump-frames is only available for case i runs")
        result = run_case_ii(irset, config)
    emit_report(result, args.out, figures=args.figures, dump_frames=args.dump_frames)
    print(f"case {args.case} ({args.method}) report written to {args.out}")
    return 0


def _cmd_verify(args) -> int:
    return 0 if verify.run_all(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="szctrack",
        description="Dictionary-based sound zone control with audio-only "
                    "listener position tracking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scene = sub.add_parser("gen-scene", help="simulate an IR set from a scene")
    src = p_scene.add_mutually_exclusive_group()
    src.add_argument("--scene", type=Path, help="scene.json file")
    src.add_argument("--preset", choices=presets.SCENE_PRESETS, default="desk",
                     help="built-in scene (default: desk)")
    p_scene.add_argument("--out", type=Path, required=True, help="output IR set directory")
    p_scene.set_defaults(func=_cmd_gen_scene)

    p_design = sub.add_parser("design", help="design a per-position filter dictionary")
    p_design.add_argument("irset", type=Path, help="IR set directory")
    p_design.add_argument("--out", type=Path, required=True, help="dictionary directory")
    p_design.add_argument("--method", choices=("acc", "pm"), default="pm")
    p_design.add_argument("--zeta", type=float, default=0.5)
    p_design.add_argument("--lambda", dest="ridge", type=float, default=1e-5)
    p_design.add_argument("--lref", type=int, default=1, help="reference loudspeaker")
    p_design.add_argument("--delta", type=int, default=None,
                          help="modeling delay in samples (default: half the filter)")
    p_design.add_argument("--filter-len", type=int, default=32)
    p_design.set_defaults(func=_cmd_design)

    p_run = sub.add_parser("run", help="run a Case I or Case II experiment")
    p_run.add_argument("irset", type=Path, help="IR set directory")
    p_run.add_argument("--case", choices=("i", "ii"), default="i")
    p_run.add_argument("--method", choices=("acc", "pm"), default="pm")
    p_run.add_argument("--scheme", choices=("all",) + SCHEMES, default="all")
    p_run.add_argument("--traj", default="preset",
                       help="'preset' or a trajectory JSON file (case i)")
    p_run.add_argument("--input", choices=("noise", "sweep", "file"), default="noise")
    p_run.add_argument("--input-file", type=Path, default=None,
                       help="raw f64 mono signal (with --input file)")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--mc", type=int, default=50,
                       help="Monte-Carlo iterations (case ii)")
    p_run.add_argument("--subset", default=None,
                       help="comma-separated dictionary position ids (case ii)")
    p_run.add_argument("--frames", type=int, default=40, help="total frames per run")
    p_run.add_argument("--frame-len", type=int, default=256)
    p_run.add_argument("--filter-len", type=int, default=32)
    p_run.add_argument("--zeta", type=float, default=0.5)
    p_run.add_argument("--lambda", dest="ridge", type=float, default=1e-5)
    p_run.add_argument("--lref", type=int, default=1)
    p_run.add_argument("--delta", type=int, default=None)
    p_run.add_argument("--out", type=Path, required=True, help="report directory")
    p_run.add_argument("--no-figures", dest="figures", action="store_false",
                       help="skip PNG rendering")
    p_run.add_argument("--dump-frames", type=Path, default=None,
                       help="dump per-scheme signals as raw f64 (case i)")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the built-in oracle suites")
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
