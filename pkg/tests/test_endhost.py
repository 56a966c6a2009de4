import math

import pytest

from helpers import burst_cfg, session_cfg
from pabo.endhost import (BurstGenCfg, OrderLog, SessionCfg, TransportMode, assign_orders,
                          burst_schedule)
from pabo.runner import Run, run_config


def test_session_cfg_derived_sizes():
    c = SessionCfg()
    assert c.segments == math.ceil(2**20 / 1500) == 700
    assert c.window_segments == 30
    assert SessionCfg(mss=536).segments == 1957 and SessionCfg(mss=536).window_segments == 84
    with pytest.raises(ValueError):
        SessionCfg(advertised_window=100)


def test_burst_cfg_rejects_overlapping_generatings():
    with pytest.raises(ValueError):
        BurstGenCfg(100, 1e-3, 0.05)


def test_burst_schedule():
    ts = burst_schedule(BurstGenCfg(3, 1e-5, 0.2), 0.0, 0.5)
    assert len(ts) == 9
    assert ts[:3] == pytest.approx([0, 1e-5, 2e-5])
    assert ts[3] == pytest.approx(0.20003)


def test_burst_source_emits_schedule():
    cfg = burst_cfg(n=20, duration=0.25, senders=("H1",))
    r = Run(cfg).run()
    assert r.data_created == len(burst_schedule(BurstGenCfg(20, 1e-5, 0.2), 0, 0.25)) == 40


def test_order_log_and_displacements():
    log = OrderLog()
    for seq in range(4):
        assert log.stamp_send(seq) == seq + 1
    assert log.stamp_send(2) == 3          # retransmission keeps s_i
    for seq in (0, 2, 1, 3):
        log.stamp_receive(seq, log.sent[seq])
    assert log.stamp_receive(2, 3) is None
    assert assign_orders(log) == [0, -1, 1, 0]


def flows(r):
    return r.session_flows()


def test_pabo_sessions_complete_in_order_without_congestion():
    r = run_config(session_cfg(servers=("H1",), queue=500))
    fl = flows(r)
    assert [f.request_index for f in fl] == [0, 1]
    assert all(f.completed is not None for f in fl)
    assert all(f.segments_received == f.n_segments == math.ceil(100_000 / 536) for f in fl)
    assert r.entropy == 0.0 and r.total_drops == 0
    # the second request waits for its scheduled slot
    assert fl[1].start == pytest.approx(0.05e9)


def test_request_waits_for_previous_completion():
    r = run_config(session_cfg(servers=("H1",), queue=500, gap=1e-4))
    a, b = flows(r)
    assert b.start >= a.completed


def test_pabo_window_is_capped_by_advertised_window():
    run = Run(session_cfg(servers=("H1",), queue=500, window=5360, requests=1))
    run.run()
    snd = next(iter(run.hosts["H1"].senders.values()))
    assert snd.cap == 10 and snd.cwnd == 10 and snd.rec.retransmissions == 0


def test_reno_recovers_from_losses():
    r = run_config(session_cfg(mode="baseline", queue=8, window=536 * 8, duration=10.0))
    fl = flows(r)
    assert r.data_dropped > 0
    assert sum(f.retransmissions for f in fl) > 0
    assert all(f.completed is not None for f in fl)
    assert r.conserved()


def test_reno_without_fast_retransmit_waits_for_timeout():
    cfg = session_cfg(mode="baseline", queue=8, duration=3.0, fast_retransmit=False,
                      requests=1)
    run = Run(cfg)
    run.run()
    senders = [s for h in run.hosts.values() for s in h.senders.values()]
    assert any(s.timeouts > 0 for s in senders)
    assert all(s.mode is TransportMode.RENO for s in senders)


def test_pabo_sessions_bounce_and_never_drop():
    # windows fit the sender queues, so the only congestion point is the fabric
    r = run_config(session_cfg(queue=20, window=536 * 20))
    assert r.total_drops == 0 and r.bounce.bounced_frames > 0
    assert all(f.completed is not None for f in flows(r))
    assert r.entropy > 0


def test_host_reinjects_frames_bounced_to_it():
    # tiny first-hop queues push bounces all the way back to the senders
    cfg = burst_cfg(n=300, queues=(5, 400, 1500, 1500), theta=0.5)
    run = Run(cfg)
    r = run.run()
    assert sum(h.reinjected for h in run.hosts.values()) > 0
    assert r.total_drops == 0 and r.conserved()
    assert max(d.max_bounced_distance for d in run.deliveries) >= 3
