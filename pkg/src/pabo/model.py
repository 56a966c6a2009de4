"""Frames, links and the per-frame bounce counters."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum

# header 14 + FCS 4 + preamble 8 + inter-frame gap 12
ETHERNET_OVERHEAD = 38
DEFAULT_RATE = 1e9
DATA_PAYLOAD = 1500
REQUEST_PAYLOAD = 200


class MacAddr(bytes):
    """Six-octet hardware address, printed as ``0A-AA-0A-00-00-01``."""

    def __new__(cls, octets):
        b = bytes(octets)
        if len(b) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {len(b)}")
        return super().__new__(cls, b)

    @classmethod
    def parse(cls, text: str) -> "MacAddr":
        parts = text.replace(":", "-").split("-")
        return cls(int(p, 16) for p in parts)

    def __str__(self) -> str:
        return "-".join(f"{o:02X}" for o in self)

    def __repr__(self) -> str:
        return f"MacAddr('{self}')"


class FrameKind(IntEnum):
    DATA = 0
    ACK = 1
    REQUEST = 2


class Frame:
    """A link-layer frame.

    Counters: ``bounced_hop`` is the number of bounce events, ``bounced_distance``
    the current distance back from the last normally reached switch,
    ``max_bounced_distance`` its running maximum and ``total_hop`` the number of
    hops taken after leaving the source (bounces included).
    """

    __slots__ = (
        "frame_id", "src", "dst", "flow_id", "seq", "payload_len", "kind",
        "bounced_hop", "bounced_distance", "max_bounced_distance", "total_hop",
        "send_order", "created_at", "bounced", "trail", "ack", "meta",
    )

    def __init__(self, frame_id: int, src: MacAddr, dst: MacAddr, flow_id=None,
                 seq: int = 0, payload_len: int = DATA_PAYLOAD,
                 kind: FrameKind = FrameKind.DATA, created_at: int = 0,
                 send_order: int = 0):
        self.frame_id = frame_id
        self.src = src
        self.dst = dst
        self.flow_id = flow_id
        self.seq = seq
        self.payload_len = payload_len
        self.kind = kind
        self.bounced_hop = 0
        self.bounced_distance = 0
        self.max_bounced_distance = 0
        self.total_hop = 0
        self.send_order = send_order
        self.created_at = created_at
        # set by the node that bounced the frame, cleared on normal forwarding
        self.bounced = False
        # upstream ports of the switches on the frame's progress path
        self.trail: list[int] = []
        self.ack = 0
        self.meta = None

    @property
    def counters(self) -> tuple[int, int, int, int]:
        return (self.bounced_hop, self.bounced_distance,
                self.max_bounced_distance, self.total_hop)

    def __repr__(self) -> str:
        return (f"Frame(#{self.frame_id} {self.kind.name} flow={self.flow_id} "
                f"seq={self.seq} n_p={self.bounced_hop} d={self.bounced_distance} "
                f"max={self.max_bounced_distance} hops={self.total_hop})")


def record_bounce(f: Frame) -> Frame:
    f.bounced_hop += 1
    f.bounced_distance += 1
    if f.bounced_distance > f.max_bounced_distance:
        f.max_bounced_distance = f.bounced_distance
    f.total_hop += 1
    f.bounced = True
    return f


def record_forward(f: Frame) -> Frame:
    if f.bounced_distance > 0:
        f.bounced_distance -= 1
    f.total_hop += 1
    f.bounced = False
    return f


def wire_time(payload: int, rate: float = DEFAULT_RATE) -> float:
    """Serialization time in seconds of a frame carrying ``payload`` bytes."""
    if rate <= 0:
        raise ValueError(f"link rate must be positive, got {rate}")
    return (payload + ETHERNET_OVERHEAD) * 8 / rate


def wire_time_ns(payload: int, rate: float = DEFAULT_RATE) -> int:
    if rate <= 0:
        raise ValueError(f"link rate must be positive, got {rate}")
    return int(round((payload + ETHERNET_OVERHEAD) * 8 * 1e9 / rate))


@dataclass(frozen=True)
class Link:
    a: tuple[str, int]
    b: tuple[str, int]
    rate: float = DEFAULT_RATE
    propagation_delay: float = 0.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("link rate must be positive")
        if self.propagation_delay < 0:
            raise ValueError("propagation delay must be non-negative")


TRACE_COLUMNS = ("time", "frame_id", "flow_id", "seq", "node", "event",
                 "n_p", "dist", "max_dist", "total_hop", "port", "queue")


class Tracer:
    """Collects per-frame event rows in memory."""

    def __init__(self):
        self.rows: list[tuple] = []

    def record(self, time_ns: int, f: Frame, node: str, event: str,
               port: int | None = None, queue: str = "") -> None:
        self.rows.append((time_ns, f.frame_id, f.flow_id, f.seq, node, event,
                          f.bounced_hop, f.bounced_distance,
                          f.max_bounced_distance, f.total_hop, port, queue))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow((f"{r[0] / 1e9:.9f}",) + tuple(
                    "" if v is None else v for v in r[1:]))
