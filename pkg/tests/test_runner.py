import csv
import json

import pytest

from helpers import burst_cfg, session_cfg
from pabo.config import ConfigError
from pabo.fabric import BounceQueueOverflow
from pabo.model import wire_time
from pabo.runner import Run, run_config


def test_conservation_and_outputs(tmp_path):
    r = run_config(burst_cfg(n=200))
    c, d, x, f = r.conservation()
    assert c == 600 and c == d + x + f and x == 0
    m = r.write(tmp_path)
    for name in ("rd.csv", "entropy.csv", "bounce_by_switch.csv", "max_bounced_distance.csv",
                 "totalhop_cdf.csv", "util_timeseries.csv", "flows.csv", "switch_stats.csv",
                 "manifest.json", "config.yaml"):
        assert (tmp_path / name).exists(), name
    assert json.loads((tmp_path / "manifest.json").read_text()) == m
    assert m["headline"]["bounced_frames"] == r.bounce.bounced_frames
    rows = list(csv.DictReader(open(tmp_path / "totalhop_cdf.csv")))
    assert float(rows[-1]["cdf"]) == 1.0
    assert sum(float(r["RD"]) for r in csv.DictReader(open(tmp_path / "rd.csv"))
               if r["flow"] == "ALL") == pytest.approx(1.0)


def test_in_flight_counted_when_cut_short():
    r = run_config(burst_cfg(n=200, duration=0.003))
    c, d, x, f = r.conservation()
    assert f > 0 and c == d + x + f


def test_propagation_delay_adds_latency():
    from pabo.config import LinkCfg
    slow = run_config(burst_cfg(n=5, senders=("H1",), link=LinkCfg(1e9, 1e-5)))
    fast = run_config(burst_cfg(n=5, senders=("H1",)))
    first = lambda r: min(d.delivered for d in r.run.deliveries)
    assert first(slow) - first(fast) == 4 * 10_000
    assert slow.conserved()


def test_delay_lower_bound():
    r = run_config(burst_cfg(n=500))
    for d in r.run.deliveries:
        assert d.delay >= (d.total_hop + 1) * wire_time(1500) - 1e-12


def test_baseline_equivalence_at_theta_one(tmp_path):
    a = run_config(burst_cfg(n=300, mode="pabo", theta=1.0, queues=(1000, 500, 3000, 1500)),
                   trace=True)
    b = run_config(burst_cfg(n=300, mode="baseline", theta=1.0), trace=True)
    assert a.run.tracer.rows == b.run.tracer.rows


def test_bounce_queue_overflow_is_reported():
    with pytest.raises(BounceQueueOverflow, match=r"S\d port \d"):
        run_config(burst_cfg(n=800, queues=(20, 2, 1500, 1500), theta=0.5))


def test_unknown_host_named():
    with pytest.raises(ConfigError, match=r"traffic.sessions\[0\].client"):
        Run(session_cfg(client="H99"))


def test_fattree_sessions_run():
    r = run_config(session_cfg("fattree", "H9", ("H1", "H5", "H13"), theta=0.95, queue=100,
                               window=50000, requests=1))
    assert r.total_drops == 0 and r.conserved()
    assert r.bounce.bouncing_switches <= {"C1"}
