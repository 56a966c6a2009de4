"""Assemble a scenario into a running network and collect its results."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import config as cfgmod
from .config import ScenarioConfig
from .endhost import (BurstGenCfg, BurstSource, ClientSession, FlowRecord, Host, Server,
                      SessionCfg, TransportMode, assign_orders)
from .engine import EventKind, ScenarioError, SimReport, Simulator, to_ns
from .fabric import BounceParams, Node, OutputPort, PaboSwitch, Switch
from .metrics import (BounceReport, Delivery, ReorderDistribution, UtilTrace, bounce_report,
                      delay_stats, reorder_density, reorder_entropy, time_ratio, util_variance)
from .model import Frame, FrameKind, Tracer
from .topology import Network, build


class Run:
    """One simulation instance built from a :class:`ScenarioConfig`."""

    def __init__(self, cfg: ScenarioConfig, trace: bool | None = None):
        self.cfg = cfg
        self.sim = Simulator(cfg.seed)
        self.tracer = Tracer() if (cfg.outputs.trace if trace is None else trace) else None
        self.topo: Network = build(cfg.topology, rate=cfg.link.rate,
                                   propagation_delay=cfg.link.propagation_delay)
        self.pabo = cfg.mode == "pabo"
        self.params = BounceParams(cfg.theta, cfg.lam)
        self.nodes: dict[str, Node] = {}
        self.hosts: dict[str, Host] = {}
        self.switches: dict[str, Switch] = {}
        self.flows: list[FlowRecord] = []
        self.sources: list[BurstSource] = []
        self.sessions: list[ClientSession] = []
        self.deliveries: list[Delivery] = []
        self.created = Counter()
        self.delivered = Counter()
        self.dropped = Counter()
        self.drops_by_node = Counter()
        self.data_drops_by_node = Counter()
        self.drops_by_flow = Counter()
        self.in_propagation = 0
        self._frame_id = 0
        self._host_names = self.topo.host_by_mac()
        self._shortest = self.topo.shortest_hops()
        self._build()
        self._install_traffic()

    # assembly

    def _build(self) -> None:
        cfg, q = self.cfg, self.cfg.queues
        factor = 1 if self.pabo else q.baseline_factor
        sample_ns = to_ns(cfg.outputs.util_sample_interval)
        for name, mac in self.topo.hosts.items():
            h = Host(name, mac)
            self.hosts[name] = h
            self.nodes[name] = h
        for name, mac in self.topo.switches.items():
            sw = PaboSwitch(name, mac, self.params) if self.pabo else Switch(name, mac)
            if self.pabo:
                sw.rng = self.sim.stream(f"bounce:{name}")
            self.switches[name] = sw
            self.nodes[name] = sw
        for name, node in self.nodes.items():
            node.net = self
            is_host = name in self.hosts
            ncap = (q.host_normal if is_host else q.switch_normal) * factor
            bcap = q.host_bounce if is_host else q.switch_bounce
            ports = self.topo.ports(name)
            if sorted(ports) != list(range(len(ports))):
                raise ScenarioError(f"{name}: ports must be numbered 0..n-1")
            for idx in range(len(ports)):
                node.add_port(OutputPort(node, idx, ncap, bcap, cfg.link.rate,
                                         to_ns(cfg.link.propagation_delay), cfg.theta,
                                         sample_ns))
        for name, node in self.nodes.items():
            for idx, (peer, pport) in self.topo.ports(name).items():
                node.ports[idx].peer = self.nodes[peer]
                node.ports[idx].peer_port = pport
        for name, sw in self.switches.items():
            table = self.topo.tables[name]
            sw.attach_fib(table.lookup, table.fib_entries())
        s = self.sim
        s.on(EventKind.TX_COMPLETE, self._tx_complete)
        s.on(EventKind.FRAME_ARRIVAL, self._arrival)
        s.on(EventKind.GENERATOR_TICK, lambda target, _: target.tick())
        s.on(EventKind.TIMER_EXPIRY, lambda target, _: target.on_timer())

    def _host(self, name: str, where: str) -> Host:
        h = self.hosts.get(name)
        if h is None:
            raise cfgmod.ConfigError(f"{where}: unknown host {name!r}")
        return h

    def _install_traffic(self) -> None:
        for i, b in enumerate(self.cfg.bursts):
            where = f"traffic.bursts[{i}]"
            src, dst = self._host(b.src, where + ".src"), self._host(b.dst, where + ".dst")
            gen = BurstSource(src, dst, BurstGenCfg(b.num_packets_per_generate, b.send_interval,
                                                    b.pause_interval, b.payload), b.start)
            self.sources.append(gen)
            self.flows.append(gen.record)
            gen.install()
        mode = TransportMode.PABO if self.pabo else TransportMode.RENO
        for i, s in enumerate(self.cfg.sessions):
            where = f"traffic.sessions[{i}]"
            client = self._host(s.client, where + ".client")
            scfg = SessionCfg(s.request_len, s.reply_len, s.requests_per_session,
                              s.inter_request_gap, s.advertised_window, s.mss,
                              s.fast_retransmit, s.rto_fixed)
            for name in s.servers:
                server = self._host(name, where + ".servers")
                if server.server is None:
                    Server(server, scfg, mode)
                sess = ClientSession(client, server, scfg, s.start)
                self.sessions.append(sess)
                sess.install()

    # hooks called by nodes

    def next_frame_id(self) -> int:
        self._frame_id += 1
        return self._frame_id

    def on_create(self, f: Frame, node: Node) -> None:
        self.created[f.kind] += 1

    def on_drop(self, f: Frame, node: Node) -> None:
        self.dropped[f.kind] += 1
        self.drops_by_node[node.name] += 1
        if f.kind == FrameKind.DATA:
            self.data_drops_by_node[node.name] += 1
            self.drops_by_flow[f.flow_id] += 1

    def on_bounce(self, f: Frame, node: Node) -> None:
        pass

    def on_deliver(self, f: Frame, host: Host) -> None:
        self.delivered[f.kind] += 1
        if self.tracer is not None:
            self.tracer.record(self.sim.now, f, host.name, "deliver")
        if f.kind == FrameKind.DATA:
            self.deliveries.append(Delivery(
                f.flow_id, f.seq, self._host_names[bytes(f.src)], host.name, f.created_at,
                self.sim.now, f.bounced_hop, f.max_bounced_distance, f.total_hop))

    # event handlers

    def _tx_complete(self, port: OutputPort, f: Frame) -> None:
        port.busy = False
        port.on_wire = None
        if port.prop_ns:
            self.in_propagation += 1
            self.sim.after_ns(port.prop_ns, EventKind.FRAME_ARRIVAL, port.peer, (f, port.peer_port))
        else:
            port.peer.receive(f, port.peer_port)
        port.node.kick(port)

    def _arrival(self, node: Node, payload) -> None:
        f, in_port = payload
        self.in_propagation -= 1
        node.receive(f, in_port)

    # execution

    def run(self) -> "RunResult":
        report = self.sim.run(self.cfg.duration)
        end = self.sim.now
        for node in self.nodes.values():
            for _, q in node.queues():
                q.finalize(end)
        return RunResult(self, report)

    def in_flight(self) -> int:
        n = self.in_propagation
        for node in self.nodes.values():
            for p in node.ports:
                n += len(p.normal) + len(p.bounce) + (p.on_wire is not None)
        return n

    def shortest_hops(self, src: str, dst: str) -> int:
        return self._shortest[src, dst]


@dataclass
class RunResult:
    run: Run
    report: SimReport
    headline: dict = field(default_factory=dict)

    def __post_init__(self):
        r = self.run
        cfg = r.cfg
        self.duration_ns = to_ns(cfg.duration)
        self.bounces_by_switch = {n: s.bounces for n, s in r.switches.items()}
        self.bounce = bounce_report(r.deliveries, self.bounces_by_switch)
        self.traces = self._traces()
        self.displacements = {f.flow_id: assign_orders(f.log) for f in r.flows}
        seg = max((f.n_segments for f in r.flows), default=1)
        self.d_threshold = cfg.d_threshold or max(seg, 1)
        pooled = [d for ds in self.displacements.values() for d in ds]
        self.rd = reorder_density(pooled, self.d_threshold)
        self.entropy = reorder_entropy(self.rd)
        self.headline = self._headline()

    def _traces(self) -> list[UtilTrace]:
        out = []
        for name, sw in self.run.switches.items():
            for p in sw.ports:
                for label, q in (("normal", p.normal), ("bounce", p.bounce)):
                    out.append(UtilTrace(name, p.index, label, q.capacity, self.duration_ns,
                                         q.area, q.above_t, q.ever_above, q.max_len, q.samples))
        return out

    @property
    def data_created(self) -> int:
        return self.run.created[FrameKind.DATA]

    @property
    def data_dropped(self) -> int:
        return self.run.dropped[FrameKind.DATA]

    @property
    def drop_rate(self) -> float:
        return self.data_dropped / self.data_created if self.data_created else 0.0

    @property
    def total_drops(self) -> int:
        return sum(self.run.dropped.values())

    def conservation(self) -> tuple[int, int, int, int]:
        """(created, delivered, dropped, in flight) over all frame kinds."""
        r = self.run
        return (sum(r.created.values()), sum(r.delivered.values()),
                sum(r.dropped.values()), r.in_flight())

    def conserved(self) -> bool:
        c, d, x, f = self.conservation()
        return c == d + x + f

    def session_flows(self) -> list[FlowRecord]:
        return [f for s in self.run.sessions for f in s.records]

    def mean_fct(self) -> float | None:
        fcts = [f.fct for f in self.session_flows() if f.fct is not None]
        return sum(fcts) / len(fcts) if fcts else None

    def variance(self) -> float:
        return util_variance(self.traces)

    def time_ratio(self, theta: float | None = None) -> float:
        th = self.run.cfg.theta if theta is None else theta
        return time_ratio(self.traces, th, exact_theta=self.run.cfg.theta)

    def _headline(self) -> dict:
        r = self.run
        mean_delay, sd_delay = delay_stats(r.deliveries)
        flows = self.session_flows()
        c, d, x, f = self.conservation()
        hops = [dl.total_hop for dl in r.deliveries]
        return {
            "entropy": self.entropy,
            "variance": self.variance(),
            "time_ratio": self.time_ratio(),
            "data_frames_created": self.data_created,
            "data_frames_dropped": self.data_dropped,
            "drop_rate": self.drop_rate,
            "bounced_frames": self.bounce.bounced_frames,
            "delivered_data_frames": self.bounce.delivered,
            "bounce_fraction": self.bounce.bounce_fraction,
            "total_hop_sum": sum(hops),
            "mean_total_hop": sum(hops) / len(hops) if hops else 0.0,
            "mean_fct": self.mean_fct(),
            "flows_complete": sum(1 for fl in flows if fl.completed is not None),
            "flows_total": len(flows),
            "mean_packet_delay": mean_delay,
            "sd_packet_delay": sd_delay,
            "frames_created": c,
            "frames_delivered": d,
            "frames_dropped": x,
            "frames_in_flight": f,
            "events_dispatched": self.report.dispatched,
            "final_time": self.report.final_time,
        }

    # output files

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        r = self.run
        cfg = r.cfg

        def table(name, header, rows):
            with open(out / name, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)

        rd_rows = [("ALL", k, c, _fmt(c / self.rd.n_received))
                   for k, c in sorted(self.rd.s_counts.items())]
        ent_rows = [("ALL", self.rd.n_received, self.rd.excluded, _fmt(self.entropy))]
        for fid, ds in self.displacements.items():
            rd = reorder_density(ds, self.d_threshold)
            rd_rows += [(fid, k, c, _fmt(c / rd.n_received)) for k, c in sorted(rd.s_counts.items())]
            ent_rows.append((fid, rd.n_received, rd.excluded, _fmt(reorder_entropy(rd))))
        table("rd.csv", ("flow", "k", "S", "RD"), rd_rows)
        table("entropy.csv", ("flow", "n_received", "excluded", "entropy"), ent_rows)

        b = self.bounce
        table("bounce_by_switch.csv", ("switch", "bounces", "forwards", "drops", "data_drops"),
              [(n, sw.bounces, sw.forwards, sw.drops, r.data_drops_by_node[n])
               for n, sw in r.switches.items()])
        table("drops_by_node.csv", ("node", "drops", "data_drops"),
              [(n, node.drops, r.data_drops_by_node[n]) for n, node in r.nodes.items()])
        table("max_bounced_distance.csv", ("distance", "frames", "delivered", "fraction"),
              [(k, c, b.delivered, _fmt(c / b.delivered)) for k, c in b.max_distance_hist.items()])
        table("totalhop_cdf.csv", ("total_hop", "frames_at_most", "delivered", "cdf"),
              [(h, acc, b.delivered, _fmt(frac)) for h, acc, frac in b.total_hop_cdf()])
        table("switch_stats.csv",
              ("switch", "port", "queue", "capacity", "mean_util", "max_len", "time_above_theta"),
              [(t.node, t.port, t.queue, t.capacity, _fmt(t.mean_util), t.max_len,
                _fmt(t.above_ns / 1e9)) for t in self.traces])
        table("util_timeseries.csv", ("switch", "port", "queue", "time", "occupancy", "util"),
              [(t.node, t.port, t.queue, f"{ts / 1e9:.9f}", n, _fmt(n / t.capacity))
               for t in self.traces if t.max_len > 0 for ts, n in t.samples])
        by_flow: dict[str, list[Delivery]] = {}
        for dl in r.deliveries:
            by_flow.setdefault(dl.flow_id, []).append(dl)
        flow_rows = []
        for fl in r.flows:
            ds = by_flow.get(fl.flow_id, [])
            delays = [dl.delay for dl in ds]
            flow_rows.append((
                fl.flow_id, fl.src, fl.dst, fl.request_index,
                "" if fl.start is None else f"{fl.start / 1e9:.9f}",
                "" if fl.completed is None else f"{fl.completed / 1e9:.9f}",
                "" if fl.fct is None else _fmt(fl.fct),
                fl.segments_sent, fl.segments_received, fl.retransmissions,
                r.drops_by_flow[fl.flow_id], len(ds),
                _fmt(sum(delays) / len(delays)) if delays else "",
                "rd.csv"))
        table("flows.csv", ("flow_id", "src", "dst", "request_index", "start", "completion",
                            "fct", "segments_sent", "segments_received", "retransmissions",
                            "drops", "delivered_frames", "mean_delay", "displacements"), flow_rows)
        if r.tracer is not None:
            r.tracer.write_csv(out / "trace.csv")
        manifest = {
            "scenario": cfg.name,
            "config_hash": cfgmod.config_hash(cfg),
            "seed": cfg.seed,
            "mode": cfg.mode,
            "theta": cfg.theta,
            "lambda": cfg.lam,
            "d_threshold": self.d_threshold,
            "headline": {k: (round(v, 12) if isinstance(v, float) else v)
                         for k, v in self.headline.items()},
        }
        (out / "config.yaml").write_text(cfgmod.render(cfg))
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


def _fmt(x: float) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return str(x)
    return repr(round(x, 12))


def run_config(cfg: ScenarioConfig, trace: bool | None = None) -> RunResult:
    return Run(cfg, trace).run()
