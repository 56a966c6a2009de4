from pabo.config import BurstBlock, LinkCfg, OutputCfg, QueueCfg, ScenarioConfig, SessionBlock


def burst_cfg(n=50, mode="pabo", theta=0.8, lam=50.0, queues=(500, 500, 1500, 1500),
              duration=0.05, senders=("H1", "H2", "H3"), **kw):
    q = QueueCfg(*queues)
    return ScenarioConfig(
        "burst-test", "tree", mode, theta, lam, duration, 1, queues=q,
        bursts=tuple(BurstBlock(s, "H4", n, pause_interval=max(0.2, n * 2e-5)) for s in senders),
        **kw)


def session_cfg(topology="tree", client="H4", servers=("H1", "H2", "H3"), mode="pabo",
                theta=0.8, lam=50.0, reply_len=100_000, requests=2, gap=0.05, queue=20,
                duration=0.5, mss=536, window=45535, **kw):
    q = QueueCfg(queue, queue, queue, queue)
    s = SessionBlock(client, tuple(servers), reply_len=reply_len, requests_per_session=requests,
                     inter_request_gap=gap, mss=mss, advertised_window=window,
                     **{k: kw.pop(k) for k in ("fast_retransmit", "rto_fixed") if k in kw})
    return ScenarioConfig("session-test", topology, mode, theta, lam, duration, 1, queues=q,
                          sessions=(s,), **kw)
