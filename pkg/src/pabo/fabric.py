"""Switch data plane: FIB with per-port utilization, dual output queues,
bounce-first scheduling, the bounce decision and a drop-tail baseline."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .engine import EventKind, ScenarioError
from .model import Frame, FrameKind, MacAddr, record_bounce, record_forward, wire_time_ns


class BounceQueueOverflow(ScenarioError):
    pass


class RoutingError(ScenarioError):
    pass


@dataclass(frozen=True)
class BounceParams:
    theta: float
    lam: float

    def __post_init__(self):
        # theta == 1 is accepted as "never bounce"; lam == 0 is the linear limit
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1), got {self.theta}")
        if self.lam < 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


def bounce_probability(u: float, n: int, p: BounceParams) -> float:
    """Probability of bouncing a frame that has already been bounced ``n``
    times when the destined output queue is at utilization ``u``."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"utilization must lie in [0, 1], got {u}")
    theta = p.theta
    if u <= theta:
        return 0.0
    if u >= 1.0:
        return 1.0
    a = p.lam / (n + 1)
    # both exponents are non-positive, so expm1 cannot overflow for any lambda
    den = math.expm1(a * (theta - 1.0))
    if den == 0.0:
        return (u - theta) / (1.0 - theta)
    r = math.expm1(a * (theta - u)) / den
    return 0.0 if r < 0.0 else (1.0 if r > 1.0 else r)


class FrameQueue:
    """Drop-tail FIFO that integrates its own occupancy over time."""

    __slots__ = ("frames", "capacity", "label", "area", "last_t", "max_len",
                 "thr", "above_t", "ever_above", "samples", "sample_ns", "next_sample",
                 "enqueued", "dequeued")

    def __init__(self, capacity: int, label: str, theta: float = 1.0, sample_ns: int = 0):
        if capacity <= 0:
            raise ValueError(f"queue capacity must be positive ({label})")
        self.frames: deque[Frame] = deque()
        self.capacity = capacity
        self.label = label
        self.area = 0
        self.last_t = 0
        self.max_len = 0
        self.thr = theta * capacity
        self.above_t = 0
        self.ever_above = False
        self.samples: list[tuple[int, int]] = []
        self.sample_ns = sample_ns
        self.next_sample = 0
        self.enqueued = 0
        self.dequeued = 0

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def full(self) -> bool:
        return len(self.frames) >= self.capacity

    def _advance(self, now: int) -> None:
        dt = now - self.last_t
        if dt:
            n = len(self.frames)
            self.area += n * dt
            if n > self.thr:
                self.above_t += dt
            self.last_t = now

    def _sample(self, now: int) -> None:
        n = len(self.frames)
        if n > self.max_len:
            self.max_len = n
        if n > self.thr:
            self.ever_above = True
        if now >= self.next_sample:
            s = self.samples
            if s and s[-1][0] == now:
                s[-1] = (now, n)
            else:
                s.append((now, n))
            self.next_sample = now + self.sample_ns

    def push(self, f: Frame, now: int) -> None:
        self._advance(now)
        self.frames.append(f)
        self.enqueued += 1
        self._sample(now)

    def pop(self, now: int) -> Frame:
        self._advance(now)
        f = self.frames.popleft()
        self.dequeued += 1
        self._sample(now)
        return f

    def finalize(self, now: int) -> None:
        self._advance(now)

    def mean_occupancy(self, duration_ns: int) -> float:
        return self.area / duration_ns if duration_ns > 0 else 0.0


class OutputPort:
    """One direction of a full-duplex link: a bounce queue with strict
    priority over a normal queue, feeding a single transmitter."""

    __slots__ = ("node", "index", "peer", "peer_port", "rate", "prop_ns",
                 "normal", "bounce", "busy", "on_wire", "_wire_cache", "tracked")

    def __init__(self, node: "Node", index: int, normal_cap: int, bounce_cap: int,
                 rate: float, prop_ns: int = 0, theta: float = 1.0, sample_ns: int = 0):
        self.node = node
        self.index = index
        self.peer: Node | None = None
        self.peer_port = -1
        self.rate = rate
        self.prop_ns = prop_ns
        self.normal = FrameQueue(normal_cap, f"{node.name}:{index}:normal", theta, sample_ns)
        self.bounce = FrameQueue(bounce_cap, f"{node.name}:{index}:bounce", 1.0, sample_ns)
        self.busy = False
        self.on_wire: Frame | None = None
        self._wire_cache: dict[int, int] = {}
        # whether the owning node keeps a FIB utilization column for this port
        self.tracked = False

    def wire_ns(self, payload: int) -> int:
        t = self._wire_cache.get(payload)
        if t is None:
            t = self._wire_cache[payload] = wire_time_ns(payload, self.rate)
        return t

    def __repr__(self) -> str:
        peer = self.peer.name if self.peer is not None else "?"
        return f"<port {self.node.name}:{self.index} -> {peer}>"


def next_to_transmit(port: OutputPort, now: int = 0) -> Frame | None:
    """Head of the bounce queue if any, else head of the normal queue."""
    if port.bounce.frames:
        return port.bounce.pop(now)
    if port.normal.frames:
        f = port.normal.pop(now)
        if port.tracked:
            update_util(port.node, port.index, -1)
        return f
    return None


@dataclass
class FibEntry:
    dst: object
    port: int
    util: float


class Fib:
    """Destination-to-port mapping plus a utilization column per output port.

    Utilization is held as an integer slot count so that an enqueue followed by
    a dequeue restores the exact prior value.
    """

    def __init__(self, lookup: Callable[[MacAddr], int], capacities: list[int],
                 entries: list[tuple[object, int]] | None = None):
        self._lookup = lookup
        self._cache: dict[bytes, int] = {}
        self.capacity = list(capacities)
        self.slots = [0] * len(capacities)
        self._entries = entries or []

    def route(self, dst: MacAddr) -> int:
        port = self._cache.get(dst)
        if port is None:
            port = self._lookup(dst)
            if port is None:
                raise RoutingError(f"no route for {MacAddr(dst)}")
            self._cache[dst] = port
        return port

    def util(self, port: int) -> float:
        return self.slots[port] / self.capacity[port]

    def entries(self) -> list[FibEntry]:
        return [FibEntry(d, p, self.util(p)) for d, p in self._entries]


def update_util(node: "Node", port: int, delta: int) -> None:
    """Shift the FIB utilization of ``port`` by ``delta`` slots (+1 enqueue, -1 dequeue)."""
    fib = node.fib
    s = fib.slots[port] + delta
    if s < 0 or s > fib.capacity[port]:
        raise ScenarioError(
            f"utilization bookkeeping left [0, 1] at {node.name} port {port}: "
            f"{s}/{fib.capacity[port]}")
    fib.slots[port] = s


class Node:
    """Anything with output ports attached to a running network."""

    kind = "node"

    def __init__(self, name: str, mac: MacAddr):
        self.name = name
        self.mac = mac
        self.ports: list[OutputPort] = []
        self.net = None
        self.fib: Fib | None = None
        self.drops = 0

    def __repr__(self) -> str:
        return f"<{self.kind} {self.name}>"

    def add_port(self, port: OutputPort) -> None:
        self.ports.append(port)

    def receive(self, f: Frame, in_port: int) -> None:
        raise NotImplementedError

    def kick(self, port: OutputPort) -> None:
        if port.busy:
            return
        net = self.net
        from_bounce = bool(port.bounce.frames)
        f = next_to_transmit(port, net.sim.now)
        if f is None:
            return
        if net.tracer is not None:
            net.tracer.record(net.sim.now, f, self.name, "dequeue", port.index,
                              "bounce" if from_bounce else "normal")
        port.busy = True
        port.on_wire = f
        net.sim.after_ns(port.wire_ns(f.payload_len), EventKind.TX_COMPLETE, port, f)

    def enqueue(self, port: OutputPort, f: Frame, to_bounce: bool) -> bool:
        """Put ``f`` on ``port``; returns False when a normal queue drops it."""
        net = self.net
        now = net.sim.now
        if to_bounce:
            q = port.bounce
            if len(q.frames) >= q.capacity:
                raise BounceQueueOverflow(
                    f"bounce queue overflow at {self.name} port {port.index} "
                    f"(capacity {q.capacity}) t={now / 1e9:.9f}s")
            q.push(f, now)
        else:
            q = port.normal
            if len(q.frames) >= q.capacity:
                self.drop(f)
                return False
            q.push(f, now)
            if port.tracked:
                update_util(self, port.index, +1)
        if net.tracer is not None:
            net.tracer.record(now, f, self.name, "enqueue", port.index,
                              "bounce" if to_bounce else "normal")
        if not port.busy:
            self.kick(port)
        return True

    def drop(self, f: Frame) -> None:
        self.drops += 1
        net = self.net
        net.on_drop(f, self)
        if net.tracer is not None:
            net.tracer.record(net.sim.now, f, self.name, "drop")

    def queues(self):
        for p in self.ports:
            yield p, p.normal
            yield p, p.bounce


class Switch(Node):
    """Drop-tail switch: every frame is forwarded to its routed port."""

    kind = "switch"
    pabo = False

    def __init__(self, name: str, mac: MacAddr):
        super().__init__(name, mac)
        self.bounces = 0
        self.forwards = 0

    def attach_fib(self, lookup: Callable[[MacAddr], int],
                   entries: list[tuple[object, int]] | None = None) -> None:
        self.fib = Fib(lookup, [p.normal.capacity for p in self.ports], entries)
        for p in self.ports:
            p.tracked = True

    def receive(self, f: Frame, in_port: int) -> None:
        out = self.fib.route(f.dst)
        upstream = f.trail.pop() if f.bounced else in_port
        self._forward(f, out, upstream)

    def _forward(self, f: Frame, out: int, upstream: int) -> None:
        f.trail.append(upstream)
        record_forward(f)
        self.forwards += 1
        net = self.net
        if net.tracer is not None:
            net.tracer.record(net.sim.now, f, self.name, "forward", out)
        self.enqueue(self.ports[out], f, False)


class PaboSwitch(Switch):
    """Switch that may return a data frame toward the previous hop instead of
    queueing it at a congested output."""

    pabo = True

    def __init__(self, name: str, mac: MacAddr, params: BounceParams):
        super().__init__(name, mac)
        self.params = params
        self.rng = None

    def decide_bounce(self, f: Frame, out: int) -> bool:
        if f.kind != FrameKind.DATA:
            return False
        p = self.params
        fib = self.fib
        u = fib.slots[out] / fib.capacity[out]
        if u <= p.theta:
            return False
        prob = bounce_probability(u, f.bounced_hop, p)
        if prob >= 1.0:
            return True
        return self.rng.uniform() < prob

    def receive(self, f: Frame, in_port: int) -> None:
        out = self.fib.route(f.dst)
        upstream = f.trail.pop() if f.bounced else in_port
        if self.decide_bounce(f, out):
            record_bounce(f)
            self.bounces += 1
            net = self.net
            net.on_bounce(f, self)
            if net.tracer is not None:
                net.tracer.record(net.sim.now, f, self.name, "bounce", upstream)
            self.enqueue(self.ports[upstream], f, True)
        else:
            self._forward(f, out, upstream)


def handle_frame(sw: Switch, f: Frame, in_port: int) -> None:
    sw.receive(f, in_port)
