"""Static topologies and their forwarding tables.

Two builders are provided: the seven-switch aggregation tree and the k=4
Fattree with two-level prefix/suffix tables over address-mapped MACs.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .model import Link, MacAddr

MAC_PREFIX = (0x0A, 0xAA)


def mac_for_ip(pod: int, switch: int, id: int, first: int = 10) -> MacAddr:
    """MAC address mapped one-to-one from the IPv4 address first.pod.switch.id."""
    parts = (first, pod, switch, id)
    for p in parts:
        if not 0 <= p <= 255:
            raise ValueError(f"address component {p} does not fit in one octet")
    return MacAddr(MAC_PREFIX + parts)


class MaskKind(str, Enum):
    PREFIX = "prefix"
    SUFFIX = "suffix"


@dataclass(frozen=True)
class TableEntry:
    pattern: MacAddr
    mask_kind: MaskKind
    mask_octets: int
    port: int

    def matches(self, dst: bytes) -> bool:
        m = self.mask_octets
        if self.mask_kind is MaskKind.PREFIX:
            # the two shared leading octets are never compared
            return dst[2:2 + m] == self.pattern[2:2 + m]
        return m == 0 or dst[6 - m:] == self.pattern[6 - m:]


@dataclass
class TwoLevelTable:
    entries: list[TableEntry] = field(default_factory=list)

    def add_prefix(self, pattern: MacAddr, octets: int, port: int) -> None:
        self.entries.append(TableEntry(pattern, MaskKind.PREFIX, octets, port))

    def add_suffix(self, pattern: MacAddr, octets: int, port: int) -> None:
        self.entries.append(TableEntry(pattern, MaskKind.SUFFIX, octets, port))

    def lookup(self, dst: bytes) -> int | None:
        return two_level_lookup(self, dst)

    def fib_entries(self) -> list[tuple[object, int]]:
        return [(f"{e.pattern}/{e.mask_kind.value}{e.mask_octets * 8}", e.port)
                for e in self.entries]


def two_level_lookup(t: TwoLevelTable, dst: bytes) -> int | None:
    """First matching prefix entry wins; otherwise the first matching suffix entry."""
    for e in t.entries:
        if e.mask_kind is MaskKind.PREFIX and e.matches(dst):
            return e.port
    for e in t.entries:
        if e.mask_kind is MaskKind.SUFFIX and e.matches(dst):
            return e.port
    return None


@dataclass
class ExactTable:
    ports: dict[bytes, int] = field(default_factory=dict)

    def lookup(self, dst: bytes) -> int | None:
        return self.ports.get(dst)

    def fib_entries(self) -> list[tuple[object, int]]:
        return [(str(MacAddr(d)), p) for d, p in self.ports.items()]


@dataclass
class Network:
    """Nodes, point-to-point links and a forwarding table per switch."""

    name: str
    hosts: dict[str, MacAddr] = field(default_factory=dict)
    switches: dict[str, MacAddr] = field(default_factory=dict)
    links: list[Link] = field(default_factory=list)
    tables: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self._adj: dict[str, dict[int, tuple[str, int]]] = {}

    def add_host(self, name: str, mac: MacAddr) -> None:
        self.hosts[name] = mac

    def add_switch(self, name: str, mac: MacAddr) -> None:
        self.switches[name] = mac

    def connect(self, a: str, pa: int, b: str, pb: int, **kw) -> None:
        for n, p in ((a, pa), (b, pb)):
            if p in self._adj.setdefault(n, {}):
                raise ValueError(f"port {p} of {n} already wired")
        self._adj[a][pa] = (b, pb)
        self._adj[b][pb] = (a, pa)
        self.links.append(Link((a, pa), (b, pb), **kw))

    def ports(self, node: str) -> dict[int, tuple[str, int]]:
        return self._adj.get(node, {})

    def peer(self, node: str, port: int) -> tuple[str, int]:
        return self._adj[node][port]

    def host_by_mac(self) -> dict[bytes, str]:
        return {bytes(m): n for n, m in self.hosts.items()}

    def walk(self, src: str, dst: str, limit: int | None = None) -> list[tuple[str, int]]:
        """Follow the tables from ``src`` to ``dst``; returns (switch, out_port) hops."""
        if limit is None:
            limit = 2 * (len(self.switches) + 1)
        dmac = self.hosts[dst]
        (node, _), = self.ports(src).values()
        hops = []
        while node != dst:
            if node not in self.switches:
                raise ValueError(f"walk {src}->{dst} ended at host {node}")
            port = self.tables[node].lookup(dmac)
            if port is None:
                raise ValueError(f"{node} has no route to {dst}")
            hops.append((node, port))
            if len(hops) > limit:
                raise ValueError(f"forwarding loop on {src}->{dst}: {hops}")
            node, _ = self.peer(node, port)
        return hops

    def shortest_hops(self) -> dict[tuple[str, str], int]:
        """Switch count of the graph-shortest path between every host pair (BFS)."""
        out = {}
        for s in self.hosts:
            dist = {s: 0}
            q = deque([s])
            while q:
                n = q.popleft()
                for m, _ in self.ports(n).values():
                    if m not in dist:
                        dist[m] = dist[n] + 1
                        if m in self.switches:
                            q.append(m)
            for d in self.hosts:
                if d != s:
                    out[s, d] = dist[d] - 1
        return out

    def export_csv(self, nodes_path, edges_path) -> None:
        with open(nodes_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("name", "kind", "mac"))
            for n, m in self.hosts.items():
                w.writerow((n, "host", str(m)))
            for n, m in self.switches.items():
                w.writerow((n, "switch", str(m)))
        with open(edges_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("a", "a_port", "b", "b_port", "rate", "propagation_delay"))
            for l in self.links:
                w.writerow((*l.a, *l.b, l.rate, l.propagation_delay))


def _static_tables(net: Network) -> None:
    """Exact-match tables from BFS over the switch graph (unique paths on trees)."""
    for sw in net.switches:
        table = ExactTable()
        first_port: dict[str, int] = {}
        q = deque()
        for p, (nb, _) in sorted(net.ports(sw).items()):
            first_port[nb] = p
            q.append(nb)
        seen = {sw, *first_port}
        while q:
            n = q.popleft()
            if n in net.hosts:
                table.ports[bytes(net.hosts[n])] = first_port[n]
                continue
            for m, _ in net.ports(n).values():
                if m not in seen:
                    seen.add(m)
                    first_port[m] = first_port[n]
                    q.append(m)
        net.tables[sw] = table


# (switch, its ports in order); port 0 faces the host side, the last faces S7
TREE_WIRING = {
    "S1": ("H1", "S4"),
    "S2": ("H2", "S5"),
    "S3": ("H3", "S6"),
    "S4": ("S1", "S7"),
    "S5": ("S2", "S7"),
    "S6": ("S3", "S7"),
    "S7": ("H4", "S4", "S5", "S6"),
}


def build_tree(rate: float = 1e9, propagation_delay: float = 0.0) -> Network:
    """Three servers H1-H3 and a client H4 joined by seven switches.

    Each server reaches H4 through one first-hop switch (S1-S3), one middle
    switch (S4-S6) and the shared last-hop switch S7.
    """
    net = Network("tree")
    for i in range(1, 5):
        net.add_host(f"H{i}", mac_for_ip(0, 0, i))
    for i in range(1, 8):
        net.add_switch(f"S{i}", mac_for_ip(0, 1, i))
    seen = set()
    for sw, peers in TREE_WIRING.items():
        for p, nb in enumerate(peers):
            key = frozenset((sw, nb))
            if key in seen:
                continue
            seen.add(key)
            if nb in net.hosts:
                net.connect(sw, p, nb, 0, rate=rate, propagation_delay=propagation_delay)
            else:
                net.connect(sw, p, nb, TREE_WIRING[nb].index(sw),
                            rate=rate, propagation_delay=propagation_delay)
    _static_tables(net)
    return net


def fattree_names(k: int = 4):
    """Naming used by the Fattree builder.

    Pod ``p`` holds edge switches S(pk+1)..S(pk+k/2) followed by its aggregation
    switches; host ``10.p.s.i`` (i = 2..k/2+1) is H(p*k*k/4 + s*k/2 + i - 1).
    """
    half = k // 2
    hosts, edges, aggs = {}, {}, {}
    for p in range(k):
        for s in range(half):
            edges[p, s] = f"S{p * k + s + 1}"
            aggs[p, half + s] = f"S{p * k + half + s + 1}"
            for i in range(2, half + 2):
                hosts[p, s, i] = f"H{p * half * half + s * half + i - 1}"
    cores = {j: f"C{j + 1}" for j in range(half * half)}
    return hosts, edges, aggs, cores


def build_fattree(k: int = 4, rate: float = 1e9, propagation_delay: float = 0.0) -> Network:
    """k-ary Fattree with two-level tables.

    Edge and aggregation switches use ports 0..k/2-1 downward and k/2..k-1
    upward; core ``j`` uses port ``p`` toward pod ``p``. Inter-pod traffic
    leaves a switch in position ``z`` of its pod on upward port
    ``(id - 2 + z) mod k/2 + k/2``, so at k=4 the left-hand switches send host
    id 2 to port 2 and id 3 to port 3 and the right-hand switches swap them.
    """
    if k % 2 or k < 2:
        raise ValueError("k must be a positive even number")
    half = k // 2
    hosts, edges, aggs, cores = fattree_names(k)
    net = Network(f"fattree-k{k}")
    for (p, s, i), name in sorted(hosts.items(), key=lambda kv: int(kv[1][1:])):
        net.add_host(name, mac_for_ip(p, s, i))
    for p in range(k):
        for s in range(half):
            net.add_switch(edges[p, s], mac_for_ip(p, s, 1))
        for z in range(half, k):
            net.add_switch(aggs[p, z], mac_for_ip(p, z, 1))
    for j, name in cores.items():
        net.add_switch(name, mac_for_ip(k, j // half + 1, j % half + 1))
    kw = dict(rate=rate, propagation_delay=propagation_delay)

    for p in range(k):
        for s in range(half):
            for i in range(2, half + 2):
                net.connect(edges[p, s], i - 2, hosts[p, s, i], 0, **kw)
            for z in range(half, k):
                net.connect(edges[p, s], z, aggs[p, z], s, **kw)
        for z in range(half, k):
            for u in range(half, k):
                j = (z - half) * half + (u - half)
                net.connect(aggs[p, z], u, cores[j], p, **kw)

    def suffixes(t: TwoLevelTable, z: int) -> None:
        for i in range(2, half + 2):
            t.add_suffix(MacAddr((0, 0, 0, 0, 0, i)), 1, (i - 2 + z) % half + half)

    for p in range(k):
        for s in range(half):
            t = TwoLevelTable()
            for i in range(2, half + 2):
                t.add_prefix(mac_for_ip(p, s, i), 4, i - 2)
            suffixes(t, s)
            net.tables[edges[p, s]] = t
        for z in range(half, k):
            t = TwoLevelTable()
            for s in range(half):
                t.add_prefix(mac_for_ip(p, s, 0), 3, s)
            suffixes(t, z)
            net.tables[aggs[p, z]] = t
    for j, name in cores.items():
        t = TwoLevelTable()
        for p in range(k):
            t.add_prefix(mac_for_ip(p, 0, 0), 2, p)
        net.tables[name] = t
    return net


def build(name: str, **kw) -> Network:
    if name == "tree":
        return build_tree(**kw)
    if name == "fattree":
        return build_fattree(**kw)
    raise ValueError(f"unknown topology {name!r}")
