"""Single entry point wiring config, simulator, controller, service and the
benchmark reports.

Subcommands: serve, bench-odometry, compare-drive, replay, check-kinematics.
Reports are machine-readable JSON (sorted keys, no timestamps — byte-identical
for a given config and seed) written under --out, with a one-line human
summary on stdout. Exit codes are per error class; see errors.py.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import AppConfig, apply_noise_flag, default_config, load_config
from .episodes import replay as replay_episode
from .errors import CasterbaseError
from .runner import bench_odometry, compare_drive
from .se2 import Pose2
from .verify import check_kinematics


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON config file (defaults built in)")
    p.add_argument("--seed", type=int, help="override the simulator seed")
    p.add_argument(
        "--noise",
        default="default",
        metavar="off|default|STD",
        help="noise level: 'off' (ideal sensors), 'default', or a slip std "
        "that scales both noise sources",
    )
    p.add_argument("--out", metavar="DIR", help="directory for the JSON report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casterbase",
        description="Holonomic caster-base simulator, teleoperation service and benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the teleop service and operator UI host")
    _add_common(p)
    p.add_argument("--port", type=int, help="override the websocket/UI port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--ui",
        metavar="DIR",
        default="frontend/dist",
        help="operator UI bundle to host (placeholder page if absent)",
    )
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("bench-odometry", help="drive a path shape over seeds, report drift")
    _add_common(p)
    p.add_argument("--shape", choices=("square", "circle", "spin"), default="square")
    p.add_argument("--scale", type=float, default=1.0, help="path length scale in meters")
    p.add_argument("--seeds", type=int, default=20, help="number of noise seeds")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("compare-drive", help="race both drive modes to one goal")
    _add_common(p)
    p.add_argument(
        "--goal",
        nargs=3,
        type=float,
        default=(0.0, 1.0, 0.0),
        metavar=("X", "Y", "THETA"),
        help="goal pose in meters and radians (default: pure lateral 0 1 0)",
    )
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("replay", help="re-run a recorded episode and verify it")
    _add_common(p)
    p.add_argument("episode", help="episode .jsonl file (with its .meta.json sidecar)")
    p.set_defaults(handler=_cmd_replay)

    p = sub.add_parser("check-kinematics", help="round-trip and no-slip oracle sweep")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(handler=_cmd_check)

    return parser


def _load(args: argparse.Namespace) -> AppConfig:
    cfg = load_config(args.config) if args.config else default_config()
    sim = cfg.sim
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    sim = apply_noise_flag(sim, args.noise)
    cfg = replace(cfg, sim=sim)
    if getattr(args, "port", None) is not None:
        cfg = replace(cfg, teleop=replace(cfg.teleop, port=args.port))
    return cfg


def _emit(report: dict, args: argparse.Namespace, filename: str) -> None:
    public = {k: v for k, v in report.items() if not k.startswith("_")}
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / filename
        path.write_text(json.dumps(public, sort_keys=True, indent=2) + "\n")
        print(f"report: {path}")


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve  # deferred: pulls in the web stack

    cfg = _load(args)
    print(f"serving on ws://{args.host}:{cfg.teleop.port}/ws (UI at http://{args.host}:{cfg.teleop.port}/)")
    serve(cfg, ui_dir=args.ui, host=args.host)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load(args)
    report = bench_odometry(cfg.base, cfg.sim, cfg.gains, args.shape, args.scale, args.seeds)
    m = report["mean"]
    print(
        f"{args.shape} x{args.seeds} seeds: "
        f"translation drift {m['translation_drift_cm_per_m']:.4f} cm/m, "
        f"rotation drift {m['rotation_drift_deg_per_rev']:.4f} deg/360deg"
    )
    _emit(report, args, "bench_odometry.json")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load(args)
    goal = Pose2(*args.goal)
    report = compare_drive(cfg.base, cfg.sim, cfg.gains, goal)
    print(
        f"goal ({goal.x:g}, {goal.y:g}, {goal.theta:g}): "
        f"holonomic {report['holonomic_path_m']:.3f} m / {report['holonomic_time_s']:.2f} s, "
        f"differential {report['diff_path_m']:.3f} m / {report['diff_time_s']:.2f} s, "
        f"ratio {report['ratio']:.3f}"
    )
    _emit(report, args, "compare_drive.json")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    report = replay_episode(args.episode)
    print(
        f"{report['episode']}: {report['ticks']} ticks, "
        f"max position deviation {report['max_position_deviation_m']:.3e} m, "
        f"max heading deviation {report['max_heading_deviation_rad']:.3e} rad"
    )
    _emit(report, args, "replay.json")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    cfg = _load(args)
    check = check_kinematics(cfg.base, samples=args.samples, seed=cfg.sim.seed)
    report = {
        "samples": check.samples,
        "max_round_trip_error": check.max_round_trip_error,
        "max_residual": check.max_residual,
        "max_slip": check.max_slip,
        "tolerances": {
            "round_trip": check.round_trip_tol,
            "residual": check.residual_tol,
            "slip": check.slip_tol,
        },
        "passed": check.passed,
    }
    print(
        f"{'PASS' if check.passed else 'FAIL'}: {check.samples} samples, "
        f"round trip {check.max_round_trip_error:.3e}, "
        f"residual {check.max_residual:.3e}, slip {check.max_slip:.3e}"
    )
    _emit(report, args, "check_kinematics.json")
    return 0 if check.passed else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CasterbaseError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
