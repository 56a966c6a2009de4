"""Grid sweeps over theta, lambda and server count."""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .engine import ScenarioError, SimulationError, derive_seed

COLUMNS = (
    "theta", "lambda", "servers", "seed", "entropy", "variance", "time_ratio",
    "bounced_frames", "delivered_data_frames", "bounce_fraction",
    "total_hop_sum", "mean_total_hop", "flows_complete", "flows_total", "mean_fct",
    "mean_packet_delay", "data_frames_dropped", "data_frames_created", "drop_rate",
)


@dataclass(frozen=True)
class GridPoint:
    theta: float
    lam: float
    servers: int | None = None

    @property
    def label(self) -> str:
        s = f"theta={self.theta:g}_lambda={self.lam:g}"
        return s if self.servers is None else f"{s}_servers={self.servers}"


def grid(cfg: ScenarioConfig, thetas=None, lambdas=None, servers=None) -> list[GridPoint]:
    thetas = list(thetas) if thetas else [cfg.theta]
    lambdas = list(lambdas) if lambdas else [cfg.lam]
    counts = list(servers) if servers else [None]
    return [GridPoint(t, l, n) for t, l, n in itertools.product(thetas, lambdas, counts)]


def point_config(base: ScenarioConfig, pt: GridPoint) -> ScenarioConfig:
    """The base config moved to ``pt``; its seed depends only on the base
    seed and the point's coordinates."""
    cfg = base.with_(theta=pt.theta, lam=pt.lam,
                     seed=derive_seed(base.seed, pt.theta, pt.lam, pt.servers))
    if pt.servers is not None:
        if not cfg.sessions:
            raise ConfigError("servers: a server-count sweep needs a session block")
        first = cfg.sessions[0]
        if pt.servers > len(first.servers):
            raise ConfigError(f"servers: {pt.servers} requested, "
                              f"only {len(first.servers)} listed")
        cfg = cfg.with_(sessions=(replace(first, servers=first.servers[:pt.servers]),
                                  *cfg.sessions[1:]))
    return cfg


def run_point(base: ScenarioConfig, pt: GridPoint, out_dir: str | None = None) -> dict:
    from .runner import run_config

    cfg = point_config(base, pt)
    res = run_config(cfg)
    if out_dir is not None:
        res.write(Path(out_dir) / pt.label)
    h = res.headline
    row = {"theta": pt.theta, "lambda": pt.lam,
           "servers": "" if pt.servers is None else pt.servers, "seed": cfg.seed}
    for c in COLUMNS[4:]:
        row[c] = h[c]
    return row


def _safe(args):
    base, pt, out_dir = args
    try:
        return pt, run_point(base, pt, out_dir), None
    except (ScenarioError, SimulationError, ConfigError) as exc:
        return pt, None, f"{type(exc).__name__}: {exc}"


def sweep(base: ScenarioConfig, points: list[GridPoint], out_dir=None, jobs: int | None = None):
    """Run every point; returns (rows, failures), both sorted by coordinates."""
    if jobs is None:
        jobs = int(os.environ.get("PABO_JOBS", "1"))
    work = [(base, pt, None if out_dir is None else str(Path(out_dir) / "points"))
            for pt in points]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_safe, work))
    else:
        results = [_safe(w) for w in work]
    key = lambda pt: (pt.theta, pt.lam, -1 if pt.servers is None else pt.servers)
    results.sort(key=lambda r: key(r[0]))
    rows = [row for _, row, err in results if err is None]
    failures = [(pt, err) for pt, _, err in results if err is not None]
    if out_dir is not None:
        write_sweep(out_dir, rows, failures)
    return rows, failures


def write_sweep(out_dir, rows, failures) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    with open(out / "failures.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("theta", "lambda", "servers", "error"))
        for pt, err in failures:
            w.writerow((pt.theta, pt.lam, "" if pt.servers is None else pt.servers, err))
