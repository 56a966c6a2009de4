"""Acceptance criteria 1-17, each at its stated tolerance.

Every test records a verdict line (printed at the end of the session) and then
asserts it. Full-scenario runs are cached per session so presets shared by
several criteria are simulated once.
"""

import csv
import math
import random
from functools import lru_cache

import pytest
from scipy.stats import spearmanr

from conftest import VERDICTS, StubNet, attach, data
from pabo import config
from pabo.fabric import BounceParams, Switch, bounce_probability, next_to_transmit
from pabo.metrics import reorder_density, reorder_entropy
from pabo.runner import run_config
from pabo.sweep import grid, sweep
from pabo.topology import build_fattree

pytestmark = pytest.mark.slow

MANY_TO_ONE = ("ft-3to1", "ft-6to1", "ft-9to1", "ft-12to1")


def verdict(n, ok, detail):
    VERDICTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@lru_cache(maxsize=None)
def preset_run(name, mode="pabo"):
    return run_config(config.preset(name).with_(mode=mode))


def fmt(x, nd=4):
    return "None" if x is None else f"{x:.{nd}f}"


# exact checks

def test_criterion_01_bounce_probability():
    p = BounceParams(0.5, 5)
    ref = bounce_probability(0.75, 0, p)
    ok = abs(ref - 0.77730) <= 1e-5
    bounds = True
    for theta in (0.0, 0.2, 0.5, 0.8, 0.95):
        for lam in (0.0, 1.0, 5.0, 50.0, 160.0):
            q = BounceParams(theta, lam)
            for n in range(10):
                bounds &= bounce_probability(theta, n, q) == 0.0
                bounds &= bounce_probability(theta * 0.5, n, q) == 0.0
                bounds &= bounce_probability(1.0, n, q) == 1.0
    mono_u = mono_n = True
    for theta, lam in ((0.5, 5.0), (0.8, 50.0), (0.2, 1.0)):
        q = BounceParams(theta, lam)
        us = [theta + (1 - theta) * (i + 1) / 51 for i in range(50)]
        table = [[bounce_probability(u, n, q) for u in us] for n in range(10)]
        mono_u &= all(r[i] < r[i + 1] for r in table for i in range(49))
        mono_n &= all(table[n][i] >= table[n + 1][i] for n in range(9) for i in range(50))
    verdict(1, ok and bounds and mono_u and mono_n,
            f"P(0.75,0;0.5,5)={ref:.6f} boundaries={bounds} increasing_in_u={mono_u} "
            f"nonincreasing_in_n={mono_n} (50x10 grid)")


def test_criterion_02_fib_fuzz():
    net = StubNet()
    sw = Switch("S", data().dst)
    attach(sw, net, 4, normal=16)
    sw.attach_fib(lambda d: 0)
    for p in sw.ports:
        p.busy = True
    rng = random.Random(10_000)
    bad = 0
    for i in range(10_000):
        port = sw.ports[rng.randrange(4)]
        if rng.random() < 0.55:
            sw.enqueue(port, data(i), False)
        else:
            next_to_transmit(port)
        for q in sw.ports:
            u = sw.fib.util(q.index)
            if not (0.0 <= u <= 1.0 and u == len(q.normal) / q.normal.capacity):
                bad += 1
    verdict(2, bad == 0, f"10000 ops, {bad} mismatches between util and occupancy/C_q")


def normal_departures_while_bounce_waiting(rows):
    """Replay a frame trace; count normal-queue departures from a port whose
    bounce queue held frames at that instant."""
    occ = {}
    bad = n = 0
    for r in rows:
        event, node, port, queue = r[5], r[4], r[10], r[11]
        if event == "enqueue":
            occ[node, port, queue] = occ.get((node, port, queue), 0) + 1
        elif event == "dequeue":
            occ[node, port, queue] -= 1
            if queue == "normal":
                n += 1
                if occ.get((node, port, "bounce"), 0) > 0:
                    bad += 1
    return bad, n


def test_criterion_03_scheduler_priority():
    details, total_bad = [], 0
    for name in ("tree-mild", "oo-sweep"):
        r = run_config(config.preset(name), trace=True)
        bad, n = normal_departures_while_bounce_waiting(r.run.tracer.rows)
        total_bad += bad
        details.append(f"{name}: {bad}/{n} normal departures with bounce queue non-empty")
    verdict(3, total_bad == 0, "; ".join(details))


def test_criterion_04_reorder_metrics():
    e_in = reorder_entropy(reorder_density([0] * 50, 10))
    e_swap = reorder_entropy(reorder_density([1, -1], 10))
    rng = random.Random(4)
    worst, sums_ok = -1.0, True
    for _ in range(1000):
        dt = rng.randint(1, 40)
        ds = [rng.randint(-dt, dt) for _ in range(rng.randint(1, 300))]
        rd = reorder_density(ds, dt)
        sums_ok &= abs(rd.total() - 1.0) <= 1e-12
        worst = max(worst, reorder_entropy(rd) - math.log(2 * dt + 1))
    ok = e_in == 0.0 and abs(e_swap - math.log(2)) <= 1e-9 and sums_ok and worst <= 0
    verdict(4, ok, f"E(in-order)={e_in} E(swap)-ln2={e_swap - math.log(2):.2e} "
                   f"sum RD=1: {sums_ok}; max E-ln(2D_T+1) over 1000 vectors={worst:.4f}")


def test_criterion_05_counter_algebra():
    r = preset_run("tree-mild")
    bad = sum(1 for d in r.run.deliveries
              if d.total_hop != r.run.shortest_hops(d.src, d.dst) + 2 * d.bounced_hop)
    n = len(r.run.deliveries)
    verdict(5, bad == 0 and n > 0,
            f"{n - bad}/{n} delivered frames satisfy total_hop = shortest + 2*bounces")


def test_criterion_06_fattree_routing():
    net = build_fattree()
    path = net.walk("H2", "H10")
    first = path[:3] == [("S1", 3), ("S4", 2), ("C3", 2)]
    tail = [s for s, _ in path[3:]] == ["S12", "S9"]
    pairs = loops = 0
    for s in net.hosts:
        for d in net.hosts:
            if s != d:
                hops = net.walk(s, d)
                pairs += 1
                loops += len({x for x, _ in hops}) != len(hops)
    verdict(6, first and tail and pairs == 240 and loops == 0,
            f"H2->H10 {' -> '.join(f'{s}:{p}' for s, p in path)}; {pairs} pairs, {loops} loops")


def test_criterion_07_determinism(tmp_path):
    cfg = config.preset("tree-moderate")
    run_config(cfg, trace=True).write(tmp_path / "a")
    run_config(cfg, trace=True).write(tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    diff = [f for f in files
            if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    verdict(7, not diff and "trace.csv" in files,
            f"{len(files)} files compared, differing: {diff or 'none'}")


def test_criterion_08_zero_loss():
    details, ok = [], True
    for name in config.PRESET_NAMES:
        r = preset_run(name)
        c, d, x, f = r.conservation()
        good = x == 0 and c == d + x + f
        ok &= good
        details.append(f"{name}: drops={x} created={c}=delivered {d}+in-flight {f}")
    verdict(8, ok, "; ".join(details))


# banded and directional reproductions

def test_criterion_09_mild_bounces():
    r = preset_run("tree-mild")
    b = r.bounce
    frac = b.bounce_fraction
    ok = (b.bouncing_switches == {"S7"} and abs(frac - 0.5655) <= 0.15
          and set(b.max_distance_hist) <= {0, 1})
    verdict(9, ok, f"bouncing={sorted(b.bouncing_switches)} fraction={b.bounced_frames}/"
                   f"{b.delivered}={frac:.4f} (band 0.4155..0.7155) "
                   f"maxBouncedDistance support={sorted(b.max_distance_hist)}")


def test_criterion_10_baseline_drops():
    runs = {n: preset_run(f"tree-{n}", "baseline") for n in ("mild", "moderate", "severe")}
    rate = {n: r.drop_rate for n, r in runs.items()}
    where = {n for n, c in runs["mild"].run.data_drops_by_node.items() if c}
    ok = (rate["mild"] < rate["moderate"] < rate["severe"]
          and all(0.30 <= rate[n] <= 0.60 for n in ("moderate", "severe"))
          and where <= {"S7"})
    verdict(10, ok, " ".join(f"{n}={r.data_dropped}/{r.data_created}={rate[n]:.4f}"
                             for n, r in runs.items()) + f" mild drop nodes={sorted(where)}")


def test_criterion_11_severe_total_hop():
    b = preset_run("tree-severe").bounce
    n = sum(c for h, c in b.total_hop_hist.items() if h <= 11)
    frac = n / b.delivered
    verdict(11, frac >= 0.75, f"total_hop<=11: {n}/{b.delivered}={frac:.4f} (need >= 0.75)")


def test_criterion_12_theta_sweep():
    base = config.preset("tree-moderate")
    thetas = [round(0.1 * i, 1) for i in range(1, 10)]
    rows, fails = sweep(base, grid(base, thetas, [50.0]))
    fr = [r["bounce_fraction"] for r in rows]
    rho = spearmanr([r["theta"] for r in rows], fr)[0] if len(rows) > 2 else float("nan")
    strict = all(a > b for a, b in zip(fr, fr[1:]))
    verdict(12, not fails and strict and rho <= -0.95,
            f"theta {thetas} -> bounce fraction {[round(x, 4) for x in fr]} rho={rho:.3f}")


def test_criterion_13_lambda_sweep():
    base = config.preset("tree-moderate")
    lams = [float(x) for x in range(0, 161, 20)]
    rows, fails = sweep(base, grid(base, [0.8], lams))
    th = [r["mean_total_hop"] for r in rows]
    peak = max(range(len(th)), key=th.__getitem__)
    rising = th[:peak + 1]
    rho = spearmanr(range(len(rising)), rising)[0] if len(rising) > 2 else float("nan")
    verdict(13, not fails and rho >= 0.8,
            f"lambda {[int(x) for x in lams]} -> mean totalHop {[round(x, 3) for x in th]}; "
            f"rising region lambda<= {int(lams[peak])}, rho={rho:.3f}")


def test_criterion_14_entropy_surface():
    base = config.preset("oo-sweep")
    thetas, lams = [0.1, 0.3, 0.5, 0.7, 0.9], [10.0, 50.0, 100.0]
    rows, fails = sweep(base, grid(base, thetas, lams))
    parts, ok = [], not fails
    for lam in lams:
        e = [r["entropy"] for r in rows if r["lambda"] == lam]
        rho = spearmanr(thetas, e)[0]
        good = rho < 0 and e[0] > e[-1]
        ok &= good
        parts.append(f"lambda={lam:g}: E={[round(x, 3) for x in e]} rho={rho:.2f}"
                     f"{'' if good else ' (not decreasing)'}")
    vp = preset_run("tree-moderate").variance()
    vb = preset_run("tree-moderate", "baseline").variance()
    ok &= vp < vb
    parts.append(f"variance pabo={vp:.3e} baseline={vb:.3e}")
    verdict(14, ok, "; ".join(parts))


def test_criterion_15_many_to_one():
    runs = {n: preset_run(n) for n in MANY_TO_ONE}
    fr = [runs[n].bounce.bounce_fraction for n in MANY_TO_ONE]
    mono = all(a > b for a, b in zip(fr, fr[1:]))
    s3 = runs["ft-3to1"].bounce.bouncing_switches
    s12 = runs["ft-12to1"].bounce.bouncing_switches
    allowed = {"C1", "C4", "S11", "S12", "S9"}
    ok = mono and s3 == {"C1"} and s12 <= allowed
    verdict(15, ok, f"bounce fraction 3/6/9/12 = {[round(x, 4) for x in fr]} "
                    f"(decreasing: {mono}); ft-3to1 bouncers={sorted(s3)}; "
                    f"ft-12to1 outside allowed set={sorted(s12 - allowed)}")


def test_criterion_16_fct_and_delay():
    parts, ok = [], True
    for n in MANY_TO_ONE:
        p, b = preset_run(n), preset_run(n, "baseline")
        fp, fb = p.mean_fct(), b.mean_fct()
        dp, db = p.headline["mean_packet_delay"], b.headline["mean_packet_delay"]
        good = fp is not None and fb is not None and fp < fb and dp >= db
        ok &= good
        parts.append(f"{n}: FCT {fmt(fp)}<{fmt(fb)} delay {dp * 1e3:.3f}ms>={db * 1e3:.3f}ms"
                     f"{'' if good else ' (violated)'}")
    verdict(16, ok, "; ".join(parts))


def test_criterion_17_many_to_many():
    b = preset_run("ft-m2m", "baseline")
    p = preset_run("ft-m2m")
    lossy = {n for n, c in b.run.data_drops_by_node.items() if c}
    bounces = {n: c for n, c in p.bounces_by_switch.items() if c}
    top = max(bounces, key=bounces.get) if bounces else None
    ok = lossy == {"S11"} and set(bounces) <= {"C1", "C2", "S11"} and top == "S11"
    total = sum(bounces.values())
    verdict(17, ok, f"baseline drops by node={dict(b.run.data_drops_by_node)}; pabo bounces="
                    + ", ".join(f"{k}:{v} ({v / total:.2%})" for k, v in sorted(bounces.items())))
