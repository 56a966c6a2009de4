"""Post-run measurements.

Everything here is a pure function of records collected during a run:
reorder density and entropy over send/receive displacements, buffer
utilization statistics, bounce statistics, per-packet delay and FCT.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from statistics import mean, pstdev


def displacement(s: int, r: int) -> int:
    """Positive when the packet arrives late, negative when early."""
    return r - s


@dataclass
class ReorderDistribution:
    d_threshold: int
    s_counts: dict[int, int] = field(default_factory=dict)
    n_received: int = 0
    excluded: int = 0

    @property
    def rd(self) -> dict[int, float]:
        n = self.n_received
        return {k: c / n for k, c in sorted(self.s_counts.items())} if n else {}

    def total(self) -> float:
        return sum(self.rd.values())


def reorder_density(d_list, d_threshold: int) -> ReorderDistribution:
    """Histogram of displacements within +-d_threshold, normalized by the
    number of packets kept; packets beyond the threshold count as lost."""
    if d_threshold <= 0:
        raise ValueError("d_threshold must be positive")
    counts: Counter[int] = Counter()
    excluded = 0
    for d in d_list:
        if abs(d) > d_threshold:
            excluded += 1
        else:
            counts[d] += 1
    return ReorderDistribution(d_threshold, dict(counts), sum(counts.values()), excluded)


def reorder_entropy(rd: ReorderDistribution) -> float:
    e = 0.0
    for p in rd.rd.values():
        if p > 0.0:
            e -= p * math.log(p)
    return e


@dataclass
class UtilTrace:
    """Occupancy history of one queue.

    ``samples`` are (time_ns, occupancy) pairs, possibly decimated; the exact
    time integral and time above the run's threshold are kept separately.
    """

    node: str
    port: int
    queue: str
    capacity: int
    duration_ns: int
    area: int = 0
    above_ns: int = 0
    ever_above: bool = False
    max_len: int = 0
    samples: list[tuple[int, int]] = field(default_factory=list)

    @property
    def mean_util(self) -> float:
        if self.duration_ns <= 0:
            return 0.0
        return self.area / self.duration_ns / self.capacity

    def above_from_samples(self, theta: float) -> tuple[int, bool]:
        thr = theta * self.capacity
        total, ever = 0, False
        pts = self.samples + [(self.duration_ns, 0)]
        for (t0, n), (t1, _) in zip(pts, pts[1:]):
            if n > thr:
                ever = True
                total += max(0, min(t1, self.duration_ns) - t0)
        return total, ever


def switch_mean_utils(traces: list[UtilTrace]) -> dict[str, float]:
    """Time-weighted mean occupancy of each switch's output buffers
    (normal and bounce together) over their combined capacity."""
    occ: dict[str, float] = {}
    cap: dict[str, int] = {}
    for t in traces:
        occ[t.node] = occ.get(t.node, 0.0) + (t.area / t.duration_ns if t.duration_ns else 0.0)
        cap[t.node] = cap.get(t.node, 0) + t.capacity
    return {n: occ[n] / cap[n] for n in occ}


def util_variance(traces: list[UtilTrace]) -> float:
    """Population variance across switches of their mean buffer utilization."""
    per = list(switch_mean_utils(traces).values())
    if not per:
        return 0.0
    return pstdev(per) ** 2


def time_ratio(traces: list[UtilTrace], theta: float, exact_theta: float | None = None) -> float:
    """Mean fraction of the run spent above ``theta`` by the normal queues
    that exceeded it at least once; 0 when none did."""
    fracs = []
    for t in traces:
        if t.queue != "normal" or t.duration_ns <= 0:
            continue
        if exact_theta is not None and theta == exact_theta:
            above, ever = t.above_ns, t.ever_above
        else:
            above, ever = t.above_from_samples(theta)
        if ever:
            fracs.append(above / t.duration_ns)
    return mean(fracs) if fracs else 0.0


@dataclass(frozen=True)
class Delivery:
    """A data frame that reached its destination."""

    flow_id: str
    seq: int
    src: str
    dst: str
    created: int
    delivered: int
    bounced_hop: int
    max_bounced_distance: int
    total_hop: int

    @property
    def delay(self) -> float:
        return (self.delivered - self.created) / 1e9


@dataclass
class BounceReport:
    bounces_by_switch: dict[str, int]
    bounced_frames: int
    delivered: int
    max_distance_hist: dict[int, int]
    total_hop_hist: dict[int, int]

    @property
    def bounce_fraction(self) -> float:
        return self.bounced_frames / self.delivered if self.delivered else 0.0

    def total_hop_cdf(self) -> list[tuple[int, int, float]]:
        out, acc = [], 0
        for h in sorted(self.total_hop_hist):
            acc += self.total_hop_hist[h]
            out.append((h, acc, acc / self.delivered))
        return out

    def fraction_total_hop_at_most(self, h: int) -> float:
        n = sum(c for k, c in self.total_hop_hist.items() if k <= h)
        return n / self.delivered if self.delivered else 0.0

    @property
    def bouncing_switches(self) -> set[str]:
        return {s for s, c in self.bounces_by_switch.items() if c > 0}


def bounce_report(deliveries: list[Delivery], bounces_by_switch: dict[str, int]) -> BounceReport:
    hist: Counter[int] = Counter()
    hops: Counter[int] = Counter()
    bounced = 0
    for d in deliveries:
        hist[d.max_bounced_distance] += 1
        hops[d.total_hop] += 1
        if d.bounced_hop > 0:
            bounced += 1
    return BounceReport(dict(bounces_by_switch), bounced, len(deliveries),
                        dict(sorted(hist.items())), dict(sorted(hops.items())))


@dataclass
class FlowSummary:
    flow_id: str
    fct: float | None
    per_packet_delays: list[float]
    total_hops: list[int]
    drops: int = 0
    bounces_by_switch: dict[str, int] = field(default_factory=dict)
    max_bounced_distance_histogram: dict[int, int] = field(default_factory=dict)


def flow_summaries(flows, deliveries: list[Delivery], drops_by_flow: dict[str, int]) -> list[FlowSummary]:
    by_flow: dict[str, list[Delivery]] = {}
    for d in deliveries:
        by_flow.setdefault(d.flow_id, []).append(d)
    out = []
    for f in flows:
        ds = by_flow.get(f.flow_id, [])
        out.append(FlowSummary(
            f.flow_id, f.fct, [d.delay for d in ds], [d.total_hop for d in ds],
            drops_by_flow.get(f.flow_id, 0), {},
            dict(sorted(Counter(d.max_bounced_distance for d in ds).items()))))
    return out


def delay_stats(deliveries: list[Delivery]) -> tuple[float, float]:
    if not deliveries:
        return 0.0, 0.0
    ds = [d.delay for d in deliveries]
    return mean(ds), pstdev(ds)
