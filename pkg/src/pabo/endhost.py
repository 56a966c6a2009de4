"""End hosts: traffic sources, a segment-level request/reply transport and
send/receive order bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .engine import EventKind, ScenarioError, to_ns
from .fabric import Node
from .model import DATA_PAYLOAD, REQUEST_PAYLOAD, Frame, FrameKind, MacAddr, record_forward

MIB = 1 << 20


class TransportMode(str, Enum):
    PABO = "pabo"
    RENO = "reno"


@dataclass(frozen=True)
class BurstGenCfg:
    num_packets_per_generate: int
    send_interval: float = 10e-6
    pause_interval: float = 0.2
    payload: int = DATA_PAYLOAD

    def __post_init__(self):
        if self.num_packets_per_generate <= 0:
            raise ValueError("num_packets_per_generate must be positive")
        if self.pause_interval <= self.num_packets_per_generate * self.send_interval:
            raise ValueError("pause_interval must exceed one generating's duration")


@dataclass(frozen=True)
class SessionCfg:
    request_len: int = REQUEST_PAYLOAD
    reply_len: int = MIB
    requests_per_session: int = 4
    inter_request_gap: float = 1.0
    advertised_window: int = 45535
    mss: int = 1500
    fast_retransmit: bool = True
    # fixed retransmission timeout in seconds; None runs the adaptive estimator
    rto_fixed: float | None = None

    def __post_init__(self):
        if self.advertised_window < self.mss:
            raise ValueError("advertised_window must be at least one mss")

    @property
    def segments(self) -> int:
        return math.ceil(self.reply_len / self.mss)

    @property
    def window_segments(self) -> int:
        return self.advertised_window // self.mss


@dataclass
class OrderLog:
    """Sending order per segment (assigned once) and receiving order per
    unique segment."""

    sent: dict[int, int] = field(default_factory=dict)
    next_send_order: int = 1
    next_recv_order: int = 1
    received: list[tuple[int, int, int]] = field(default_factory=list)
    _seen: set[int] = field(default_factory=set, repr=False)

    def stamp_send(self, seq: int) -> int:
        s = self.sent.get(seq)
        if s is None:
            s = self.sent[seq] = self.next_send_order
            self.next_send_order += 1
        return s

    def stamp_receive(self, seq: int, send_order: int) -> int | None:
        """Assign r_i; duplicates get None."""
        if seq in self._seen:
            return None
        self._seen.add(seq)
        r = self.next_recv_order
        self.next_recv_order += 1
        self.received.append((seq, send_order, r))
        return r


def assign_orders(log: OrderLog) -> list[int]:
    """Displacement r_i - s_i of every uniquely received segment, in arrival order."""
    return [r - s for _, s, r in log.received]


@dataclass
class FlowRecord:
    flow_id: str
    src: str
    dst: str
    request_index: int
    n_segments: int
    start: int | None = None
    completed: int | None = None
    segments_sent: int = 0
    segments_received: int = 0
    retransmissions: int = 0
    log: OrderLog = field(default_factory=OrderLog)

    @property
    def fct(self) -> float | None:
        if self.start is None or self.completed is None:
            return None
        return (self.completed - self.start) / 1e9


class Host(Node):
    """A host with a single dual-queue NIC."""

    kind = "host"

    def __init__(self, name: str, mac: MacAddr):
        super().__init__(name, mac)
        self.senders: dict[str, "Sender"] = {}
        self.receivers: dict[str, "Receiver"] = {}
        self.sinks: dict[str, FlowRecord] = {}
        self.server: "Server | None" = None
        self.reinjected = 0

    def send(self, f: Frame) -> bool:
        self.net.on_create(f, self)
        return self.enqueue(self.ports[0], f, False)

    def receive(self, f: Frame, in_port: int) -> None:
        host_on_frame(self, f)


def host_on_frame(h: Host, f: Frame) -> str:
    if f.dst == h.mac:
        h.net.on_deliver(f, h)
        if f.kind == FrameKind.DATA:
            rx = h.receivers.get(f.flow_id)
            if rx is not None:
                rx.on_data(f)
            else:
                rec = h.sinks.get(f.flow_id)
                if rec is None:
                    raise ScenarioError(f"{h.name} got data for unknown flow {f.flow_id}")
                rec.segments_received += 1
                rec.log.stamp_receive(f.seq, f.send_order)
                rec.completed = h.net.sim.now
        elif f.kind == FrameKind.ACK:
            h.senders[f.flow_id].on_ack(f.ack)
        else:
            if h.server is None:
                raise ScenarioError(f"request for {f.flow_id} reached {h.name}, which serves nothing")
            h.server.on_request(f)
        return "deliver"
    if f.bounced and f.src == h.mac:
        # own frame returned by the first-hop switch: send it out again, with priority
        record_forward(f)
        h.reinjected += 1
        net = h.net
        if net.tracer is not None:
            net.tracer.record(net.sim.now, f, h.name, "forward", 0)
        h.enqueue(h.ports[0], f, True)
        return "reinject"
    raise ScenarioError(f"misrouted frame {f!r} at {h.name}")


class BurstSource:
    """Periodic bursts: one frame per send interval, then a pause."""

    def __init__(self, host: Host, dst: Host, cfg: BurstGenCfg, start: float = 0.0,
                 flow_id: str | None = None):
        self.host = host
        self.dst = dst
        self.cfg = cfg
        self.flow_id = flow_id or f"{host.name}->{dst.name}"
        self.start_ns = to_ns(start)
        self.interval_ns = to_ns(cfg.send_interval)
        self.pause_ns = to_ns(cfg.pause_interval)
        self.in_burst = 0
        self.generatings = 0
        self.record = FlowRecord(self.flow_id, host.name, dst.name, 0, 0)
        dst.sinks[self.flow_id] = self.record

    def install(self) -> None:
        self.host.net.sim.schedule_ns(self.start_ns, EventKind.GENERATOR_TICK, self)
        self.record.start = self.start_ns

    def tick(self) -> None:
        net = self.host.net
        now = net.sim.now
        if self.in_burst == 0:
            self.generatings += 1
        rec = self.record
        seq = rec.segments_sent
        f = Frame(net.next_frame_id(), self.host.mac, self.dst.mac, self.flow_id, seq,
                  self.cfg.payload, FrameKind.DATA, now, rec.log.stamp_send(seq))
        rec.segments_sent += 1
        rec.n_segments += 1
        self.host.send(f)
        self.in_burst += 1
        if self.in_burst < self.cfg.num_packets_per_generate:
            net.sim.after_ns(self.interval_ns, EventKind.GENERATOR_TICK, self)
        else:
            self.in_burst = 0
            net.sim.after_ns(self.interval_ns + self.pause_ns, EventKind.GENERATOR_TICK, self)


def burst_schedule(cfg: BurstGenCfg, start: float, until: float) -> list[float]:
    """Emission instants a source with ``cfg`` produces in [start, until]."""
    out = []
    period = cfg.num_packets_per_generate * cfg.send_interval + cfg.pause_interval
    k = 0
    while True:
        t0 = start + k * period
        if t0 > until:
            return out
        for i in range(cfg.num_packets_per_generate):
            t = t0 + i * cfg.send_interval
            if t > until:
                return out
            out.append(t)
        k += 1


RTO_MIN = 0.2
RTO_INIT = 1.0
RTO_MAX = 240.0


class Sender:
    """Segment-granular sender.

    ``pabo`` mode only slow-starts up to the advertised window and never
    retransmits. ``reno`` mode adds congestion avoidance, fast retransmit and
    recovery, and an adaptive retransmission timer with backoff.
    """

    def __init__(self, host: Host, peer: MacAddr, rec: FlowRecord, cfg: SessionCfg,
                 mode: TransportMode):
        self.host = host
        self.peer = peer
        self.rec = rec
        self.cfg = cfg
        self.mode = TransportMode(mode)
        self.n = rec.n_segments
        self.cap = cfg.window_segments
        self.cwnd = 1.0
        self.ssthresh = math.inf
        self.snd_una = 0
        self.snd_nxt = 0
        self.high = 0  # one past the highest segment ever sent
        self.dupacks = 0
        self.in_recovery = False
        # retransmission timer
        self.rto = cfg.rto_fixed if cfg.rto_fixed is not None else RTO_INIT
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.timed: tuple[int, int] | None = None
        self.deadline: int | None = None
        self.timer_armed = False
        self.timeouts = 0

    @property
    def done(self) -> bool:
        return self.snd_una >= self.n

    def window(self) -> int:
        return min(int(self.cwnd), self.cap)

    def start(self) -> None:
        self.try_send()

    def try_send(self) -> None:
        while self.snd_nxt < self.n and self.snd_nxt - self.snd_una < self.window():
            self.transmit(self.snd_nxt)
            self.snd_nxt += 1
            if self.snd_nxt > self.high:
                self.high = self.snd_nxt

    def transmit(self, seq: int) -> None:
        rec = self.rec
        net = self.host.net
        now = net.sim.now
        retrans = seq < self.high
        if retrans:
            rec.retransmissions += 1
            self.timed = None  # Karn
        elif self.timed is None and self.mode is TransportMode.RENO:
            self.timed = (seq, now)
        payload = min(self.cfg.mss, self.cfg.reply_len - seq * self.cfg.mss)
        f = Frame(net.next_frame_id(), self.host.mac, self.peer, rec.flow_id, seq,
                  payload, FrameKind.DATA, now, rec.log.stamp_send(seq))
        rec.segments_sent += 1
        self.host.send(f)
        if self.mode is TransportMode.RENO and self.deadline is None:
            self._arm(now)

    # retransmission timer, lazily re-armed
    def _arm(self, now: int) -> None:
        self.deadline = now + to_ns(self.rto)
        if not self.timer_armed:
            self.timer_armed = True
            self.host.net.sim.schedule_ns(self.deadline, EventKind.TIMER_EXPIRY, self)

    def on_timer(self) -> None:
        self.timer_armed = False
        now = self.host.net.sim.now
        if self.deadline is None or self.done:
            return
        if now < self.deadline:
            self.timer_armed = True
            self.host.net.sim.schedule_ns(self.deadline, EventKind.TIMER_EXPIRY, self)
            return
        self.timeouts += 1
        flight = self.snd_nxt - self.snd_una
        self.ssthresh = max(flight / 2, 2.0)
        self.cwnd = 1.0
        self.in_recovery = False
        self.dupacks = 0
        self.snd_nxt = self.snd_una
        if self.cfg.rto_fixed is None:
            self.rto = min(self.rto * 2, RTO_MAX)
        self.deadline = None
        self.try_send()

    def _rtt_sample(self, r: float) -> None:
        if self.cfg.rto_fixed is not None:
            return
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        self.rto = min(max(self.srtt + 4 * self.rttvar, RTO_MIN), RTO_MAX)

    def on_ack(self, ack: int) -> None:
        sender_on_ack(self, ack)


def sender_on_ack(s: Sender, ack: int) -> None:
    now = s.host.net.sim.now
    if ack > s.snd_una:
        newly = ack - s.snd_una
        s.snd_una = ack
        if s.snd_nxt < s.snd_una:
            s.snd_nxt = s.snd_una
        s.dupacks = 0
        if s.mode is TransportMode.PABO:
            s.cwnd = min(s.cwnd + newly, float(s.cap))
        else:
            if s.timed is not None and ack > s.timed[0]:
                s._rtt_sample((now - s.timed[1]) / 1e9)
                s.timed = None
            if s.in_recovery:
                s.cwnd = s.ssthresh
                s.in_recovery = False
            elif s.cwnd < s.ssthresh:
                s.cwnd += newly
            else:
                s.cwnd += newly / s.cwnd
            if s.done:
                s.deadline = None
            else:
                s._arm(now)
        if s.done:
            return
    elif ack == s.snd_una and s.snd_nxt > s.snd_una:
        if s.mode is TransportMode.PABO:
            return
        s.dupacks += 1
        if s.in_recovery:
            s.cwnd += 1
        elif s.dupacks == 3 and s.cfg.fast_retransmit:
            flight = s.snd_nxt - s.snd_una
            s.ssthresh = max(flight / 2, 2.0)
            s.in_recovery = True
            s.transmit(s.snd_una)
            s.cwnd = s.ssthresh + 3
    s.try_send()


class Receiver:
    """Cumulative-ACK receiver with an unbounded reorder buffer."""

    def __init__(self, host: Host, peer: MacAddr, rec: FlowRecord, on_complete=None):
        self.host = host
        self.peer = peer
        self.rec = rec
        self.expected = 0
        self.ooo: set[int] = set()
        self.on_complete = on_complete

    def on_data(self, f: Frame) -> None:
        rec = self.rec
        net = self.host.net
        seq = f.seq
        if seq >= self.expected and seq not in self.ooo:
            rec.log.stamp_receive(seq, f.send_order)
            rec.segments_received += 1
            if seq == self.expected:
                self.expected += 1
                while self.expected in self.ooo:
                    self.ooo.discard(self.expected)
                    self.expected += 1
            else:
                self.ooo.add(seq)
        ack = Frame(net.next_frame_id(), self.host.mac, self.peer, rec.flow_id, seq, 0,
                    FrameKind.ACK, net.sim.now)
        ack.ack = self.expected
        self.host.send(ack)
        if self.expected >= rec.n_segments and rec.completed is None:
            rec.completed = net.sim.now
            if self.on_complete is not None:
                self.on_complete(self)


class Server:
    """Answers each request with a reply stream."""

    def __init__(self, host: Host, cfg: SessionCfg, mode: TransportMode):
        self.host = host
        self.cfg = cfg
        self.mode = TransportMode(mode)
        host.server = self

    def on_request(self, f: Frame) -> None:
        rec: FlowRecord = f.meta
        if rec.flow_id in self.host.senders:
            return
        snd = Sender(self.host, f.src, rec, self.cfg, self.mode)
        self.host.senders[rec.flow_id] = snd
        snd.start()


class ClientSession:
    """Issues ``requests_per_session`` requests to one server, one second apart.

    A request whose predecessor has not completed waits for that completion.
    """

    def __init__(self, client: Host, server: Host, cfg: SessionCfg, start: float = 0.0):
        self.client = client
        self.server = server
        self.cfg = cfg
        self.start_ns = to_ns(start)
        self.gap_ns = to_ns(cfg.inter_request_gap)
        self.records: list[FlowRecord] = []
        self.next_index = 0
        self.waiting = False

    def install(self) -> None:
        self.client.net.sim.schedule_ns(self.start_ns, EventKind.GENERATOR_TICK, self)

    def tick(self) -> None:
        if self.records and self.records[-1].completed is None:
            self.waiting = True
            return
        self._issue()

    def _issue(self) -> None:
        k = self.next_index
        self.next_index += 1
        net = self.client.net
        now = net.sim.now
        fid = f"{self.server.name}->{self.client.name}#{k}"
        rec = FlowRecord(fid, self.server.name, self.client.name, k, self.cfg.segments,
                         start=now)
        self.records.append(rec)
        net.flows.append(rec)
        self.client.receivers[fid] = Receiver(self.client, self.server.mac, rec, self._done)
        req = Frame(net.next_frame_id(), self.client.mac, self.server.mac, fid, 0,
                    self.cfg.request_len, FrameKind.REQUEST, now)
        req.meta = rec
        self.client.send(req)
        if self.next_index < self.cfg.requests_per_session:
            at = max(now, self.start_ns + self.next_index * self.gap_ns)
            net.sim.schedule_ns(at, EventKind.GENERATOR_TICK, self)

    def _done(self, rx: Receiver) -> None:
        if self.waiting:
            self.waiting = False
            self._issue()


def client_request_reply(client: Host, server: Host, cfg: SessionCfg,
                         start: float = 0.0) -> ClientSession:
    return ClientSession(client, server, cfg, start)
