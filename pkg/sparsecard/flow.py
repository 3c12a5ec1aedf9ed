"""
Reduced-graph assembly and exact minimum s-t cuts on fixed-point capacities.
"""

import logging
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import torch
from tabulate import tabulate

from .errors import InternalInvariantError, ScaleOverflowError, ValidationError
from .gadget import GadgetGraph

logger = logging.getLogger(__name__)

DEFAULT_SCALE = 10 ** 6
SCALE_ENV = "SPARSECARD_SCALE"
OVERFLOW_LIMIT = 2 ** 62

_REPR_ROWS = 20


def default_scale() -> int:
    raw = os.getenv(SCALE_ENV)
    if raw is None:
        return DEFAULT_SCALE
    try:
        scale = int(raw)
    except ValueError:
        raise ValidationError(f"{SCALE_ENV} must be a positive integer, got {raw!r}")
    if scale <= 0:
        raise ValidationError(f"{SCALE_ENV} must be a positive integer, got {raw!r}")
    return scale


class FlowNetwork:
    """
    Directed network with integer capacities.

    Arcs are kept twice: as the merged forward arc list sorted by (tail, head),
    and as a CSR residual structure in which every arc has a paired reverse
    arc (offsets / residual_heads / residual_caps / residual_rev).
    """

    def __init__(
        self,
        node_count: int,
        source: int,
        sink: int,
        tails: torch.Tensor,
        heads: torch.Tensor,
        caps: torch.Tensor,
        scale: int = 1,
        zero_rounded_arcs: int = 0,
    ) -> None:
        if node_count < 2 or not (0 <= source < node_count and 0 <= sink < node_count) or source == sink:
            raise ValidationError(f"Invalid terminals s={source} t={sink} for {node_count} nodes")
        if not (tails.numel() == heads.numel() == caps.numel()):
            raise ValidationError("Arc columns must have equal length")
        if caps.numel() and not (caps > 0).all():
            raise ValidationError("Arc capacities must be positive")
        if caps.numel() and (tails.min() < 0 or heads.min() < 0 or tails.max() >= node_count or heads.max() >= node_count):
            raise ValidationError("Arc endpoint outside the node range")

        self._node_count = node_count
        self._source = source
        self._sink = sink
        self._tails = tails
        self._heads = heads
        self._caps = caps
        self._scale = scale
        self._zero_rounded_arcs = zero_rounded_arcs
        self._build_residual()

    @staticmethod
    def from_arcs(
        node_count: int,
        source: int,
        sink: int,
        tails: torch.Tensor,
        heads: torch.Tensor,
        caps: torch.Tensor,
        scale: int = 1,
        zero_rounded_arcs: int = 0,
    ) -> "FlowNetwork":
        """Merge parallel arcs additively, drop self loops and empty arcs."""
        tails = torch.as_tensor(tails, dtype=torch.int64)
        heads = torch.as_tensor(heads, dtype=torch.int64)
        caps = torch.as_tensor(caps, dtype=torch.int64)
        if tails.numel() and (tails.min() < 0 or heads.min() < 0 or tails.max() >= node_count or heads.max() >= node_count):
            raise ValidationError("Arc endpoint outside the node range")
        keep = (tails != heads) & (caps > 0)
        tails, heads, caps = tails[keep], heads[keep], caps[keep]

        keys, inverse = torch.unique(tails * node_count + heads, sorted=True, return_inverse=True)
        merged = torch.zeros(keys.numel(), dtype=torch.int64).index_add_(0, inverse, caps)
        return FlowNetwork(
            node_count, source, sink,
            keys // node_count, keys % node_count, merged,
            scale=scale, zero_rounded_arcs=zero_rounded_arcs,
        )

    def _build_residual(self) -> None:
        n = self._node_count
        t, h, c = self._tails, self._heads, self._caps
        lo, hi = torch.minimum(t, h), torch.maximum(t, h)
        pairs, inverse = torch.unique(lo * n + hi, sorted=True, return_inverse=True)
        forward = t < h
        up = torch.zeros(pairs.numel(), dtype=torch.int64).index_add_(0, inverse[forward], c[forward])
        down = torch.zeros(pairs.numel(), dtype=torch.int64).index_add_(0, inverse[~forward], c[~forward])

        plo, phi = pairs // n, pairs % n
        # Arc 2p runs lo -> hi, arc 2p + 1 runs hi -> lo.
        r_tails = torch.stack([plo, phi], dim=1).flatten()
        r_heads = torch.stack([phi, plo], dim=1).flatten()
        r_caps = torch.stack([up, down], dim=1).flatten()
        r_rev = torch.arange(r_tails.numel(), dtype=torch.int64) ^ 1

        _, order = torch.sort(r_tails, stable=True)
        position = torch.empty_like(order)
        position[order] = torch.arange(order.numel(), dtype=torch.int64)

        self._offsets = torch.cat((
            torch.zeros(1, dtype=torch.int64),
            torch.cumsum(torch.bincount(r_tails, minlength=n), dim=0),
        ))
        self._residual_heads = r_heads[order]
        self._residual_caps = r_caps[order]
        self._residual_rev = position[r_rev[order]]

    @property
    def node_count(self) -> int:
        return self._node_count

    @property
    def source(self) -> int:
        return self._source

    @property
    def sink(self) -> int:
        return self._sink

    @property
    def scale(self) -> int:
        return self._scale

    @property
    def arc_tails(self) -> torch.Tensor:
        return self._tails

    @property
    def arc_heads(self) -> torch.Tensor:
        return self._heads

    @property
    def arc_caps(self) -> torch.Tensor:
        return self._caps

    @property
    def arc_count(self) -> int:
        return self._caps.numel()

    @property
    def zero_rounded_arcs(self) -> int:
        return self._zero_rounded_arcs

    @property
    def total_capacity(self) -> int:
        return int(self._caps.sum().item()) if self._caps.numel() else 0

    @property
    def offsets(self) -> torch.Tensor:
        return self._offsets

    @property
    def residual_heads(self) -> torch.Tensor:
        return self._residual_heads

    @property
    def residual_caps(self) -> torch.Tensor:
        return self._residual_caps

    @property
    def residual_rev(self) -> torch.Tensor:
        return self._residual_rev

    def quantization_bound(self) -> float:
        """
        Largest gap between a descaled cut and the real-weighted cut of the
        same partition. Arcs dropped after rounding to zero still count.
        """
        return (self.arc_count + self._zero_rounded_arcs) * 0.5 / self._scale

    def __str__(self) -> str:
        return f"""FlowNetwork(
    nodes={self.node_count},
    arcs={self.arc_count},
    source={self.source},
    sink={self.sink},
    scale={self.scale},
)"""

    def __repr__(self) -> str:
        shown = min(self.arc_count, _REPR_ROWS)
        rows = [
            [t, h, c] for t, h, c in zip(
                self._tails[:shown].tolist(), self._heads[:shown].tolist(), self._caps[:shown].tolist())
        ]
        if shown < self.arc_count:
            rows.append(["...", "...", "..."])
        tab = tabulate(rows, headers=["tail", "head", "cap"], tablefmt="plain")
        return tab + "\n" + f"nodes: {self.node_count}, arcs: {self.arc_count}, scale: {self.scale}"


@dataclass(eq=False)
class CutResult:
    source_side: torch.Tensor
    cut_value_scaled: int
    cut_value: float
    flow_value_scaled: int
    counters: Dict[str, int] = field(default_factory=dict)


# -----------------------------------------------------------------------------
# Assembly


def build_network(
    gadgets: Sequence[Tuple[GadgetGraph, Sequence[int]]],
    n: int,
    scale: Optional[int] = None,
) -> FlowNetwork:
    """
    Lay out ground nodes 0..n-1, then every component's auxiliary nodes in
    order, then s and t; map each gadget onto that layout and round the merged
    real weights to integers.
    """
    if scale is None:
        scale = default_scale()
    if not isinstance(scale, int) or scale <= 0:
        raise ValidationError(f"scale must be a positive integer, got {scale}")

    aux_total = sum(gg.aux_count for gg, _ in gadgets)
    node_count = n + aux_total + 2
    s, t = node_count - 2, node_count - 1

    tails, heads, weights = [], [], []
    aux_next = n
    for gg, support in gadgets:
        support = torch.as_tensor(list(support), dtype=torch.int64)
        if support.numel() != gg.support_size:
            raise ValidationError(f"Gadget of support size {gg.support_size} given {support.numel()} nodes")
        if support.numel() and (support.min() < 0 or support.max() >= n):
            raise ValidationError(f"Support node outside [0, {n})")
        layout = torch.cat((
            support,
            torch.arange(aux_next, aux_next + gg.aux_count, dtype=torch.int64),
            torch.tensor([s, t], dtype=torch.int64),
        ))
        aux_next += gg.aux_count
        tails.append(layout[gg.tails])
        heads.append(layout[gg.heads])
        weights.append(gg.weights)

    if tails:
        tails, heads, weights = torch.cat(tails), torch.cat(heads), torch.cat(weights)
    else:
        tails = heads = torch.zeros(0, dtype=torch.int64)
        weights = torch.zeros(0, dtype=torch.float64)

    keys, inverse = torch.unique(tails * node_count + heads, sorted=True, return_inverse=True)
    merged = torch.zeros(keys.numel(), dtype=torch.float64).index_add_(0, inverse, weights)

    total = (merged * scale).sum().item()
    if total >= OVERFLOW_LIMIT:
        suggested = max(1, int(scale * (OVERFLOW_LIMIT / 2) / total))
        raise ScaleOverflowError(
            f"Total scaled capacity {total:.3e} exceeds 2^62 at scale {scale}; try scale {suggested}",
            suggested_scale=suggested,
        )

    caps = torch.round(merged * scale).to(torch.int64)
    keep = caps > 0
    zero_rounded = int((~keep).sum().item())
    if zero_rounded:
        logger.warning("%d arcs rounded to zero capacity at scale %d and were dropped", zero_rounded, scale)

    net = FlowNetwork(
        node_count, s, t,
        keys[keep] // node_count, keys[keep] % node_count, caps[keep],
        scale=scale, zero_rounded_arcs=zero_rounded,
    )
    logger.debug("built network: %d nodes, %d arcs, scale %d", net.node_count, net.arc_count, scale)
    return net


def pin_nodes(net: FlowNetwork, to_source: Iterable[int], to_sink: Iterable[int]) -> FlowNetwork:
    """Force nodes onto one side of every minimum cut with sentinel-capacity terminal arcs."""
    to_source, to_sink = sorted(set(to_source)), sorted(set(to_sink))
    overlap = set(to_source) & set(to_sink)
    if overlap:
        raise ValidationError(f"Nodes pinned to both sides: {sorted(overlap)}")
    terminals = {net.source, net.sink}
    for v in to_source + to_sink:
        if not 0 <= v < net.node_count or v in terminals:
            raise ValidationError(f"Cannot pin node {v}")
    if not to_source and not to_sink:
        return net

    sentinel = net.total_capacity + 1
    if sentinel * (1 + len(to_source) + len(to_sink)) >= 2 ** 63:
        raise ScaleOverflowError("Pinning sentinel does not fit in 64-bit capacities; use a smaller scale")

    tails = torch.cat((
        net.arc_tails,
        torch.full((len(to_source),), net.source, dtype=torch.int64),
        torch.tensor(to_sink, dtype=torch.int64),
    ))
    heads = torch.cat((
        net.arc_heads,
        torch.tensor(to_source, dtype=torch.int64),
        torch.full((len(to_sink),), net.sink, dtype=torch.int64),
    ))
    caps = torch.cat((net.arc_caps, torch.full((len(to_source) + len(to_sink),), sentinel, dtype=torch.int64)))
    return FlowNetwork.from_arcs(
        net.node_count, net.source, net.sink, tails, heads, caps,
        scale=net.scale, zero_rounded_arcs=net.zero_rounded_arcs,
    )


# -----------------------------------------------------------------------------
# Push-relabel


class _PushRelabel:
    """
    Highest-label preflow push-relabel, FIFO within a label, with the gap
    heuristic and a global relabel every node_count relabels. Only the first
    phase runs: the preflow value at t is the max-flow value.
    """

    def __init__(self, net: FlowNetwork) -> None:
        self.n = net.node_count
        self.s = net.source
        self.t = net.sink
        self.first: List[int] = net.offsets.tolist()
        self.head: List[int] = net.residual_heads.tolist()
        self.cap: List[int] = net.residual_caps.tolist()
        self.rev: List[int] = net.residual_rev.tolist()

        self.label: List[int] = [0] * self.n
        self.excess: List[int] = [0] * self.n
        self.count: List[int] = [0] * self.n
        self.current: List[int] = self.first[:-1]
        self.buckets: List[deque] = [deque() for _ in range(self.n)]
        self.max_active = -1
        self.since_global = 0

        self.pushes = 0
        self.relabels = 0
        self.gaps = 0
        self.global_relabels = 0

    def run(self) -> int:
        s, first, head, cap, rev, excess = self.s, self.first, self.head, self.cap, self.rev, self.excess
        for a in range(first[s], first[s + 1]):
            c = cap[a]
            if c > 0:
                cap[a] = 0
                cap[rev[a]] += c
                excess[head[a]] += c
                excess[s] -= c

        self._global_relabel()
        while True:
            u = self._next_active()
            if u is None:
                break
            self._discharge(u)
            if self.since_global >= self.n:
                self._global_relabel()
        return excess[self.t]

    def _activate(self, v: int) -> None:
        d = self.label[v]
        self.buckets[d].append(v)
        if d > self.max_active:
            self.max_active = d

    def _global_relabel(self) -> None:
        n, label, first, head, cap, rev = self.n, self.label, self.first, self.head, self.cap, self.rev
        for v in range(n):
            label[v] = n
        label[self.t] = 0
        queue = deque([self.t])
        while queue:
            v = queue.popleft()
            d = label[v] + 1
            for a in range(first[v], first[v + 1]):
                w = head[a]
                if label[w] == n and w != self.s and cap[rev[a]] > 0:
                    label[w] = d
                    queue.append(w)

        self.count = [0] * n
        for bucket in self.buckets:
            bucket.clear()
        self.max_active = -1
        for v in range(n):
            if label[v] < n:
                self.count[label[v]] += 1
                if self.excess[v] > 0 and v != self.t and v != self.s:
                    self._activate(v)
        self.current = first[:-1]
        self.since_global = 0
        self.global_relabels += 1

    def _next_active(self) -> Optional[int]:
        label, excess = self.label, self.excess
        while self.max_active >= 0:
            bucket = self.buckets[self.max_active]
            while bucket:
                u = bucket.popleft()
                if label[u] == self.max_active and excess[u] > 0:
                    return u
            self.max_active -= 1
        return None

    def _discharge(self, u: int) -> None:
        n, t, s = self.n, self.t, self.s
        label, excess, cap, head, rev = self.label, self.excess, self.cap, self.head, self.rev
        end = self.first[u + 1]
        while excess[u] > 0:
            d = label[u]
            a = self.current[u]
            while a < end:
                if cap[a] > 0:
                    v = head[a]
                    if label[v] == d - 1:
                        delta = excess[u] if excess[u] < cap[a] else cap[a]
                        cap[a] -= delta
                        cap[rev[a]] += delta
                        excess[u] -= delta
                        if excess[v] == 0 and v != t and v != s:
                            self._activate(v)
                        excess[v] += delta
                        self.pushes += 1
                        if excess[u] == 0:
                            break
                a += 1
            self.current[u] = a
            if excess[u] == 0:
                return
            self._relabel(u)
            if label[u] >= n:
                return

    def _relabel(self, u: int) -> None:
        n, label, count = self.n, self.label, self.count
        old = label[u]
        if count[old] == 1:
            # u is alone at its label: nothing at or above it can reach t.
            for v in range(n):
                if old <= label[v] < n:
                    count[label[v]] -= 1
                    label[v] = n
            self.gaps += 1
            return

        new = n
        head, cap = self.head, self.cap
        for a in range(self.first[u], self.first[u + 1]):
            if cap[a] > 0:
                d = label[head[a]] + 1
                if d < new:
                    new = d
        count[old] -= 1
        label[u] = new
        if new < n:
            count[new] += 1
        self.current[u] = self.first[u]
        self.relabels += 1
        self.since_global += 1

    def sink_reachable(self) -> List[bool]:
        """Nodes with a residual path to t."""
        first, head, cap, rev = self.first, self.head, self.cap, self.rev
        reach = [False] * self.n
        reach[self.t] = True
        queue = deque([self.t])
        while queue:
            v = queue.popleft()
            for a in range(first[v], first[v + 1]):
                w = head[a]
                if not reach[w] and cap[rev[a]] > 0:
                    reach[w] = True
                    queue.append(w)
        return reach


def _cut_capacity(net: FlowNetwork, source_side: torch.Tensor) -> int:
    crossing = source_side[net.arc_tails] & ~source_side[net.arc_heads]
    return int(net.arc_caps[crossing].sum().item())


def min_st_cut(net: FlowNetwork) -> CutResult:
    solver = _PushRelabel(net)
    flow = solver.run()

    reach = solver.sink_reachable()
    source_side = ~torch.tensor(reach, dtype=torch.bool)
    cut = _cut_capacity(net, source_side)

    if __debug__:
        assert min(solver.cap, default=0) >= 0, "negative residual capacity"
        internal = [e for v, e in enumerate(solver.excess) if v != net.source and v != net.sink]
        assert min(internal, default=0) >= 0, "negative excess at an internal node"
        assert sum(solver.excess) == 0, "preflow does not conserve total flow"
    if cut != flow or not source_side[net.source] or source_side[net.sink]:
        raise InternalInvariantError(f"Cut {cut} does not match flow {flow}")

    counters = {
        "pushes": solver.pushes,
        "relabels": solver.relabels,
        "gaps": solver.gaps,
        "global_relabels": solver.global_relabels,
    }
    logger.debug("min cut %d on %d nodes / %d arcs: %s", cut, net.node_count, net.arc_count, counters)
    return CutResult(
        source_side=source_side,
        cut_value_scaled=cut,
        cut_value=cut / net.scale,
        flow_value_scaled=flow,
        counters=counters,
    )


def reference_max_flow(net: FlowNetwork) -> int:
    """Edmonds-Karp on the same residual structure; a cross-check for min_st_cut."""
    first = net.offsets.tolist()
    head = net.residual_heads.tolist()
    cap = net.residual_caps.tolist()
    rev = net.residual_rev.tolist()
    s, t = net.source, net.sink

    flow = 0
    while True:
        parent_arc = [-1] * net.node_count
        parent_arc[s] = -2
        queue = deque([s])
        while queue and parent_arc[t] == -1:
            v = queue.popleft()
            for a in range(first[v], first[v + 1]):
                w = head[a]
                if parent_arc[w] == -1 and cap[a] > 0:
                    parent_arc[w] = a
                    queue.append(w)
        if parent_arc[t] == -1:
            return flow

        bottleneck = None
        v = t
        while v != s:
            a = parent_arc[v]
            bottleneck = cap[a] if bottleneck is None else min(bottleneck, cap[a])
            v = head[rev[a]]
        v = t
        while v != s:
            a = parent_arc[v]
            cap[a] -= bottleneck
            cap[rev[a]] += bottleneck
            v = head[rev[a]]
        flow += bottleneck


# -----------------------------------------------------------------------------
# DIMACS


def write_dimacs(net: FlowNetwork, stream: TextIO) -> None:
    stream.write("c sparse-card reduced network\n")
    stream.write(f"c scale {net.scale}\n")
    stream.write(f"p max {net.node_count} {net.arc_count}\n")
    stream.write(f"n {net.source + 1} s\n")
    stream.write(f"n {net.sink + 1} t\n")
    for u, v, c in zip(net.arc_tails.tolist(), net.arc_heads.tolist(), net.arc_caps.tolist()):
        stream.write(f"a {u + 1} {v + 1} {c}\n")


def read_dimacs(stream: TextIO) -> FlowNetwork:
    scale = 1
    node_count = arc_count = None
    source = sink = None
    tails, heads, caps = [], [], []

    for lineno, line in enumerate(stream, start=1):
        parts = line.split()
        if not parts:
            continue
        kind = parts[0]
        try:
            if kind == "c":
                if len(parts) == 3 and parts[1] == "scale":
                    scale = int(parts[2])
            elif kind == "p":
                if len(parts) != 4 or parts[1] != "max":
                    raise ValidationError(f"line {lineno}: expected 'p max N M'")
                node_count, arc_count = int(parts[2]), int(parts[3])
            elif kind == "n":
                if parts[2] == "s":
                    source = int(parts[1]) - 1
                elif parts[2] == "t":
                    sink = int(parts[1]) - 1
                else:
                    raise ValidationError(f"line {lineno}: node designator must be 's' or 't'")
            elif kind == "a":
                tails.append(int(parts[1]) - 1)
                heads.append(int(parts[2]) - 1)
                caps.append(int(parts[3]))
            else:
                raise ValidationError(f"line {lineno}: unknown line type {kind!r}")
        except (IndexError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"line {lineno}: malformed DIMACS line {line.strip()!r}")

    if node_count is None or source is None or sink is None:
        raise ValidationError("DIMACS input lacks a problem line or terminal designators")
    if arc_count != len(caps):
        raise ValidationError(f"DIMACS header declares {arc_count} arcs, found {len(caps)}")
    if scale <= 0:
        raise ValidationError(f"DIMACS scale must be positive, got {scale}")
    if any(c < 0 for c in caps):
        raise ValidationError("DIMACS capacities must be nonnegative")

    return FlowNetwork.from_arcs(
        node_count, source, sink,
        torch.tensor(tails, dtype=torch.int64),
        torch.tensor(heads, dtype=torch.int64),
        torch.tensor(caps, dtype=torch.int64),
        scale=scale,
    )
