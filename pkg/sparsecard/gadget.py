import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Tuple

import torch
from tabulate import tabulate

from .errors import ClassMembershipError, DomainError, InternalInvariantError, ValidationError
from .plcover import PLFunction, eval_pl
from .utils import REL_TOL

logger = logging.getLogger(__name__)


class EdgeRole(IntEnum):
    SOURCE_TO_V = 0
    V_TO_SINK = 1
    V_TO_AUX = 2
    AUX_TO_V = 3
    AUX_TO_AUX = 4
    V_TO_V = 5


_ROLE_NAMES = {
    EdgeRole.SOURCE_TO_V: "source->v",
    EdgeRole.V_TO_SINK: "v->sink",
    EdgeRole.V_TO_AUX: "v->aux",
    EdgeRole.AUX_TO_V: "aux->v",
    EdgeRole.AUX_TO_AUX: "aux->aux",
    EdgeRole.V_TO_V: "v->v",
}


# -----------------------------------------------------------------------------
# Parameters


@dataclass(frozen=True)
class CGFParams:
    """z0 (k - x) + zk x + sum_j a_j min{x (k - b_j), (k - x) b_j}."""

    k: int
    z0: float
    zk: float
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if not isinstance(self.k, int) or self.k < 1:
            raise ValidationError(f"CGF support size must be a positive integer, got {self.k}")
        if len(self.a) != len(self.b):
            raise ValidationError(f"CGF needs |a| == |b|, got {len(self.a)} and {len(self.b)}")
        if self.z0 < 0 or self.zk < 0:
            raise ValidationError(f"CGF terminal weights must be nonnegative, got z0={self.z0} zk={self.zk}")
        if any(v <= 0 for v in self.a):
            raise ValidationError(f"CGF weights a must be positive: {self.a}")
        if any(v <= 0 or v >= self.k for v in self.b):
            raise ValidationError(f"CGF thresholds b must lie in (0, {self.k}): {self.b}")
        if any(b2 <= b1 for b1, b2 in zip(self.b, self.b[1:])):
            raise ValidationError(f"CGF thresholds b must be strictly increasing: {self.b}")

    @property
    def J(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class SymCGFParams:
    """
    sum_j a_j min{x, b_j}: applied to min{|A|, |e - A|} it is the symmetric CGF.

    Covers produced by sym_pl_to_cgf have b_J <= r. A larger b_J is accepted and
    only means the middle edge of that gadget never binds.
    """

    r: int
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if not isinstance(self.r, int) or self.r < 1:
            raise ValidationError(f"Symmetric CGF type must be a positive integer, got {self.r}")
        if len(self.a) != len(self.b):
            raise ValidationError(f"Symmetric CGF needs |a| == |b|, got {len(self.a)} and {len(self.b)}")
        if any(v <= 0 for v in self.a):
            raise ValidationError(f"Symmetric CGF weights a must be positive: {self.a}")
        if any(v <= 0 for v in self.b):
            raise ValidationError(f"Symmetric CGF thresholds b must be positive: {self.b}")
        if any(b2 <= b1 for b1, b2 in zip(self.b, self.b[1:])):
            raise ValidationError(f"Symmetric CGF thresholds b must be strictly increasing: {self.b}")

    @property
    def J(self) -> int:
        return len(self.a)


# -----------------------------------------------------------------------------
# Edge table


class GadgetGraph:
    """
    Directed edge list of one component's gadget, stored column-wise.

    Nodes 0..k-1 are the support, k..k+aux_count-1 auxiliary, then s and t.
    ``groups`` ties the edges of one CB-gadget together (-1 for terminal edges).
    """

    def __init__(
        self,
        kind: str,
        support_size: int,
        aux_count: int,
        tails: torch.Tensor,
        heads: torch.Tensor,
        weights: torch.Tensor,
        roles: torch.Tensor,
        groups: torch.Tensor,
    ) -> None:
        n = weights.numel()
        for name, col in (("tails", tails), ("heads", heads), ("roles", roles), ("groups", groups)):
            if col.dim() != 1 or col.numel() != n:
                raise ValidationError(f"GadgetGraph column {name} has shape {tuple(col.shape)}, expected ({n},)")
        if n and not (weights > 0).all():
            raise ValidationError("GadgetGraph weights must be strictly positive")

        self._kind = kind
        self._support_size = support_size
        self._aux_count = aux_count
        self._tails = tails
        self._heads = heads
        self._weights = weights
        self._roles = roles
        self._groups = groups
        self._summary = None

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def support_size(self) -> int:
        return self._support_size

    @property
    def aux_count(self) -> int:
        return self._aux_count

    @property
    def source(self) -> int:
        return self._support_size + self._aux_count

    @property
    def sink(self) -> int:
        return self._support_size + self._aux_count + 1

    @property
    def tails(self) -> torch.Tensor:
        return self._tails

    @property
    def heads(self) -> torch.Tensor:
        return self._heads

    @property
    def weights(self) -> torch.Tensor:
        return self._weights

    @property
    def roles(self) -> torch.Tensor:
        return self._roles

    @property
    def groups(self) -> torch.Tensor:
        return self._groups

    def __len__(self) -> int:
        return self._weights.numel()

    def __getitem__(self, key):
        if isinstance(key, int):
            return (
                int(self._tails[key]),
                int(self._heads[key]),
                float(self._weights[key]),
                EdgeRole(int(self._roles[key])),
            )

        raise ValueError(f"Unsupported key for __getitem__: {key}")

    def _with_weights(self, weights: torch.Tensor) -> "GadgetGraph":
        keep = weights > 0
        return GadgetGraph(
            kind=self._kind,
            support_size=self._support_size,
            aux_count=self._aux_count,
            tails=self._tails[keep],
            heads=self._heads[keep],
            weights=weights[keep],
            roles=self._roles[keep],
            groups=self._groups[keep],
        )

    def scaled(self, factor: float) -> "GadgetGraph":
        return self._with_weights(self._weights * factor)

    def quantized(self, scale: int) -> "GadgetGraph":
        """Weights replaced by round(w * scale); the cut function is then integral."""
        return self._with_weights(torch.round(self._weights * scale))

    def __str__(self) -> str:
        return f"""GadgetGraph(
    kind={self.kind},
    support_size={self.support_size},
    aux_count={self.aux_count},
    edges={len(self)},
)"""

    def __repr__(self) -> str:
        rows = [
            [t, h, w, _ROLE_NAMES[EdgeRole(r)]]
            for t, h, w, r in zip(
                self._tails.tolist(), self._heads.tolist(), self._weights.tolist(), self._roles.tolist())
        ]
        tab = tabulate(rows, headers=["tail", "head", "weight", "role"], tablefmt="simple", showindex=True)
        return tab + "\n" + f"kind: {self.kind}, support: {self.support_size}, aux: {self.aux_count}"


class _EdgeBuffer:
    def __init__(self) -> None:
        self._chunks: List[Tuple[torch.Tensor, ...]] = []

    def add(self, tails, heads, weight, role: EdgeRole, group: int) -> None:
        tails = torch.as_tensor(tails, dtype=torch.int64).flatten()
        heads = torch.as_tensor(heads, dtype=torch.int64).flatten()
        tails, heads = torch.broadcast_tensors(tails, heads)
        n = tails.numel()
        weights = torch.as_tensor(weight, dtype=torch.float64).flatten().expand(n)
        self._chunks.append((
            tails.clone(),
            heads.clone(),
            weights.clone(),
            torch.full((n,), int(role), dtype=torch.int8),
            torch.full((n,), group, dtype=torch.int64),
        ))

    def build(self, kind: str, support_size: int, aux_count: int) -> GadgetGraph:
        if self._chunks:
            cols = [torch.cat(col) for col in zip(*self._chunks)]
        else:
            cols = [
                torch.zeros(0, dtype=torch.int64),
                torch.zeros(0, dtype=torch.int64),
                torch.zeros(0, dtype=torch.float64),
                torch.zeros(0, dtype=torch.int8),
                torch.zeros(0, dtype=torch.int64),
            ]
        return GadgetGraph(kind, support_size, aux_count, *cols)


# -----------------------------------------------------------------------------
# Curves <-> parameters


def pl_to_cgf(pl: PLFunction) -> CGFParams:
    k = pl.k
    l0 = pl.value_at_zero
    lk = eval_pl(pl, k)
    scale = max([abs(l0), abs(lk)] + [abs(v) for v in pl._knots])
    if l0 < -REL_TOL * scale or lk < -REL_TOL * scale:
        raise ValidationError(f"Cover must be nonnegative at 0 and k, got l(0)={l0} l(k)={lk}")

    z0 = l0 / k if l0 > REL_TOL * scale else 0.0
    zk = lk / k if lk > REL_TOL * scale else 0.0
    a = tuple((m1 - m2) / k for m1, m2 in zip(pl.slopes, pl.slopes[1:]))
    if any(v <= 0 for v in a):
        raise InternalInvariantError(f"Non-positive gadget weight derived from slopes {pl.slopes}")
    return CGFParams(k=k, z0=z0, zk=zk, a=a, b=pl.breakpoints)


def cgf_to_pl(params: CGFParams) -> PLFunction:
    k = params.k
    slope = -params.z0 + params.zk + sum(a * (k - b) for a, b in zip(params.a, params.b))
    slopes = [slope]
    for a in params.a:
        slope -= a * k
        slopes.append(slope)
    return PLFunction(k=k, breakpoints=params.b, slopes=tuple(slopes), value_at_zero=params.z0 * k)


def sym_pl_to_cgf(pl: PLFunction) -> SymCGFParams:
    if not pl.flat_tail:
        raise ClassMembershipError("Symmetric CGF needs a cover that is constant past its last breakpoint")
    scale = max([abs(pl.value_at_zero)] + [abs(v) for v in pl._knots])
    if abs(pl.value_at_zero) > REL_TOL * scale:
        raise ClassMembershipError(f"Symmetric CGF needs l(0) = 0, got {pl.value_at_zero}")
    if any(m < 0 for m in pl.slopes):
        raise ClassMembershipError(f"Symmetric CGF needs a nondecreasing cover, slopes {pl.slopes}")
    a = tuple(m1 - m2 for m1, m2 in zip(pl.slopes, pl.slopes[1:]))
    return SymCGFParams(r=pl.k, a=a, b=pl.breakpoints)


def sym_cgf_to_pl(params: SymCGFParams) -> PLFunction:
    slopes = []
    acc = 0.0
    for a in reversed(params.a):
        acc += a
        slopes.append(acc)
    slopes = tuple(reversed(slopes)) + (0.0,)
    return PLFunction(k=params.r, breakpoints=params.b, slopes=slopes, value_at_zero=0.0, flat_tail=True)


# -----------------------------------------------------------------------------
# Emission


def cgf_to_gadget(params: CGFParams) -> GadgetGraph:
    k = params.k
    s, t = k + params.J, k + params.J + 1
    v = torch.arange(k, dtype=torch.int64)
    buf = _EdgeBuffer()
    if params.z0 > 0:
        buf.add(s, v, params.z0, EdgeRole.SOURCE_TO_V, -1)
    if params.zk > 0:
        buf.add(v, t, params.zk, EdgeRole.V_TO_SINK, -1)
    for j, (a, b) in enumerate(zip(params.a, params.b)):
        aux = k + j
        buf.add(v, aux, a * (k - b), EdgeRole.V_TO_AUX, j)
        buf.add(aux, v, a * b, EdgeRole.AUX_TO_V, j)

    gg = buf.build("asymmetric", k, params.J)
    expected = 2 * k * params.J + k * (params.z0 > 0) + k * (params.zk > 0)
    if len(gg) != expected:
        raise InternalInvariantError(f"Asymmetric gadget has {len(gg)} edges, expected {expected}")
    return gg


def sym_cgf_to_gadget(params: SymCGFParams, k: int) -> GadgetGraph:
    if k // 2 != params.r:
        raise ValidationError(f"Symmetric CGF of type {params.r} does not fit support size {k}")
    v = torch.arange(k, dtype=torch.int64)
    buf = _EdgeBuffer()
    for j, (a, b) in enumerate(zip(params.a, params.b)):
        e1, e2 = k + 2 * j, k + 2 * j + 1
        buf.add(v, e1, a, EdgeRole.V_TO_AUX, j)
        buf.add(e2, v, a, EdgeRole.AUX_TO_V, j)
        buf.add(e1, e2, a * b, EdgeRole.AUX_TO_AUX, j)

    gg = buf.build("symmetric", k, 2 * params.J)
    expected = params.J * (2 * k + 1)
    if len(gg) != expected:
        raise InternalInvariantError(f"Symmetric gadget has {len(gg)} edges, expected {expected}")
    return gg


def unary_gadget(g0: float, g1: float) -> GadgetGraph:
    if g0 < 0 or g1 < 0:
        raise ValidationError(f"Unary penalty must be nonnegative, got ({g0}, {g1})")
    buf = _EdgeBuffer()
    if g0 > 0:
        buf.add(1, 0, g0, EdgeRole.SOURCE_TO_V, -1)
    if g1 > 0:
        buf.add(0, 2, g1, EdgeRole.V_TO_SINK, -1)
    return buf.build("unary", 1, 0)


def pairwise_gadget(g0: float, g1: float, g2: float) -> GadgetGraph:
    """Exact two-node reduction: modular part on terminal edges plus a symmetric n-link."""
    if min(g0, g1, g2) < 0:
        raise ValidationError(f"Pairwise penalty must be nonnegative, got ({g0}, {g1}, {g2})")
    c = g1 - 0.5 * (g0 + g2)
    if c < -REL_TOL * max(g0, g1, g2):
        raise ValidationError(f"Pairwise penalty ({g0}, {g1}, {g2}) is not concave")
    v = torch.arange(2, dtype=torch.int64)
    buf = _EdgeBuffer()
    if g0 > 0:
        buf.add(2, v, 0.5 * g0, EdgeRole.SOURCE_TO_V, -1)
    if g2 > 0:
        buf.add(v, 3, 0.5 * g2, EdgeRole.V_TO_SINK, -1)
    if c > 0:
        buf.add(v, v.flip(0), c, EdgeRole.V_TO_V, 0)
    return buf.build("pairwise", 2, 0)


# -----------------------------------------------------------------------------
# Analytic cut


def _summarize(gg: GadgetGraph):
    roles = gg.roles.long()
    weights = gg.weights
    source_total = weights[roles == EdgeRole.SOURCE_TO_V].sum().item()
    sink_total = weights[roles == EdgeRole.V_TO_SINK].sum().item()
    groups = []
    for grp in torch.unique(gg.groups[gg.groups >= 0]).tolist():
        mask = gg.groups == grp
        r, w = roles[mask], weights[mask]
        w_in = w[r == EdgeRole.V_TO_AUX].sum().item()
        w_out = w[r == EdgeRole.AUX_TO_V].sum().item()
        w_mid = w[r == EdgeRole.AUX_TO_AUX].sum().item()
        w_pair = w[r == EdgeRole.V_TO_V].sum().item()
        if (r == EdgeRole.V_TO_V).any():
            groups.append(("pair", w_pair, 0.0, 0.0))
        elif (r == EdgeRole.AUX_TO_AUX).any():
            groups.append(("sym", w_in, w_out, w_mid))
        else:
            groups.append(("asym", w_in, w_out, 0.0))
    return source_total, sink_total, groups


def gadget_cut_eval(gg: GadgetGraph, i: int) -> float:
    """
    Minimum over auxiliary placements of the cut of gg when i support nodes
    sit on the source side. Each CB-gadget is minimized on its own.
    Terminal and per-gadget weights are assumed uniform over the support, as
    every emitter in this module produces them.
    """
    k = gg.support_size
    if not 0 <= i <= k:
        raise DomainError(f"Cardinality {i} outside [0, {k}]")
    if gg._summary is None:
        gg._summary = _summarize(gg)
    source_total, sink_total, groups = gg._summary

    value = (source_total * (k - i) + sink_total * i) / k
    for kind, w_in, w_out, w_mid in groups:
        if kind == "asym":
            value += min(i * w_in, (k - i) * w_out) / k
        elif kind == "sym":
            value += min(i * w_in / k, (k - i) * w_out / k, w_mid)
        else:
            value += w_in * i * (k - i) / (k * (k - 1))
    return value


def gadget_cut_profile(gg: GadgetGraph) -> torch.Tensor:
    """gadget_cut_eval at every cardinality 0..k."""
    return torch.tensor([gadget_cut_eval(gg, i) for i in range(gg.support_size + 1)], dtype=torch.float64)
