"""Command-line entry point: run, sweep, presets, validate."""

from __future__ import annotations

import argparse
import os
import sys

from . import config as cfgmod
from .config import ConfigError
from .engine import ScenarioError, SimulationError
from .sweep import grid, sweep


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _out_dir(arg: str | None, default: str) -> str:
    return arg or os.environ.get("PABO_OUT_DIR") or default


def cmd_run(args) -> int:
    from .runner import run_config

    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    if args.mode is not None:
        cfg = cfg.with_(mode=args.mode)
    if args.trace:
        cfg = cfg.with_(outputs=cfg.outputs.__class__(cfg.outputs.util_sample_interval, True))
    cfgmod.validate(cfg)
    out = _out_dir(args.out, f"out/{cfg.name}-{cfg.mode}")
    res = run_config(cfg)
    manifest = res.write(out)
    h = manifest["headline"]
    print(f"{cfg.name} [{cfg.mode}] -> {out}")
    for key in ("drop_rate", "bounce_fraction", "entropy", "variance", "time_ratio",
                "mean_total_hop", "mean_fct", "mean_packet_delay"):
        print(f"  {key:18s} {h[key]}")
    return 0


def cmd_sweep(args) -> int:
    cfg = cfgmod.load(args.config)
    if args.mode is not None:
        cfg = cfg.with_(mode=args.mode)
    if not (args.theta or args.lam or args.servers):
        raise ConfigError("sweep: give at least one of --theta, --lambda, --servers")
    points = grid(cfg, args.theta, args.lam, args.servers)
    out = _out_dir(args.out, f"out/{cfg.name}-sweep")
    rows, failures = sweep(cfg, points, out, args.jobs)
    print(f"{len(rows)} points written to {out}/sweep.csv, {len(failures)} failed")
    for pt, err in failures:
        print(f"  failed {pt.label}: {err}", file=sys.stderr)
    return 0


def cmd_presets(args) -> int:
    for name in cfgmod.PRESET_NAMES:
        print(name)
    return 0


def cmd_validate(args) -> int:
    cfg = cfgmod.load(args.config)
    print(f"{cfg.name}: ok ({cfgmod.config_hash(cfg)})")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pabo", description="Packet-bounce network simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config", help="scenario file or preset name")
    r.add_argument("--out", help="output directory (env PABO_OUT_DIR)")
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=("pabo", "baseline"))
    r.add_argument("--trace", action="store_true", help="also write the per-frame trace.csv")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep theta, lambda or server count")
    s.add_argument("config")
    s.add_argument("--theta", type=_floats)
    s.add_argument("--lambda", dest="lam", type=_floats)
    s.add_argument("--servers", type=_ints, help="truncate the first session's server list")
    s.add_argument("--mode", choices=("pabo", "baseline"))
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, help="worker processes (env PABO_JOBS)")
    s.set_defaults(func=cmd_sweep)

    pr = sub.add_parser("presets", help="list built-in scenarios")
    pr.add_argument("action", choices=("list",))
    pr.set_defaults(func=cmd_presets)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 3
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
