"""
Piecewise-linear (1+eps)-covers of concave functions at integer points.

A cover of g on [0, k] is a concave PL function l with
g(i) <= l(i) <= (1+eps) g(i) for every integer i. The greedy construction
below returns one with the fewest linear pieces; tangent_log_cover and
clique_cover are explicit comparators and min_cover_oracle is an
independent quadratic-time check of optimality.
"""

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import torch

from .errors import DomainError, SizeGuardError, ValidationError
from .sequence import ConcaveSeq, MonotoneConcaveSeq
from .utils import REL_TOL, leq_tol, lt_tol

logger = logging.getLogger(__name__)

MIN_COVER_ORACLE_GUARD = 2000


@dataclass(frozen=True)
class Line:
    slope: float
    intercept: float

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept

    @staticmethod
    def through(x1: float, y1: float, x2: float, y2: float) -> "Line":
        slope = (y2 - y1) / (x2 - x1)
        return Line(slope, y1 - slope * x1)


@dataclass(frozen=True)
class PLFunction:
    """
    Concave PL function on [0, k] given by breakpoints, slopes and l(0).

    With ``flat_tail`` the last slope is 0, the last breakpoint may sit at k
    and evaluation extends to [0, inf): the class of symmetric-half covers.
    """

    k: int
    breakpoints: Tuple[float, ...]
    slopes: Tuple[float, ...]
    value_at_zero: float
    flat_tail: bool = False
    _knots: Tuple[float, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        slopes = tuple(float(m) for m in self.slopes)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "value_at_zero", float(self.value_at_zero))

        if len(slopes) != len(bps) + 1:
            raise ValidationError(f"PLFunction needs one more slope than breakpoints, got {len(slopes)} and {len(bps)}")
        if any(m2 >= m1 for m1, m2 in zip(slopes, slopes[1:])):
            raise ValidationError(f"PLFunction slopes must be strictly decreasing: {slopes}")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValidationError(f"PLFunction breakpoints must be strictly increasing: {bps}")
        if bps and (bps[0] <= 0 or bps[-1] > self.k or (bps[-1] == self.k and not self.flat_tail)):
            raise ValidationError(f"PLFunction breakpoints must lie inside (0, {self.k}): {bps}")
        if self.flat_tail and slopes[-1] != 0.0:
            raise ValidationError("PLFunction with a flat tail must end with slope 0")

        knots = []
        x, y = 0.0, self.value_at_zero
        for b, m in zip(bps, slopes):
            y = y + m * (b - x)
            x = b
            knots.append(y)
        object.__setattr__(self, "_knots", tuple(knots))

    @property
    def num_pieces(self) -> int:
        return len(self.slopes)

    def __call__(self, x: float) -> float:
        return eval_pl(self, x)

    def lines(self) -> List[Line]:
        starts = (0.0,) + self.breakpoints
        values = (self.value_at_zero,) + self._knots
        return [Line(m, y - m * x) for x, y, m in zip(starts, values, self.slopes)]

    def evaluate_grid(self) -> torch.Tensor:
        """l(0), l(1), ..., l(k) as a float64 tensor."""
        x = torch.arange(self.k + 1, dtype=torch.float64)
        starts = torch.tensor((0.0,) + self.breakpoints, dtype=torch.float64)
        values = torch.tensor((self.value_at_zero,) + self._knots, dtype=torch.float64)
        slopes = torch.tensor(self.slopes, dtype=torch.float64)
        piece = torch.searchsorted(starts[1:], x)
        return values[piece] + slopes[piece] * (x - starts[piece])


def eval_pl(pl: PLFunction, x: float) -> float:
    if x < 0 or (x > pl.k and not pl.flat_tail):
        raise DomainError(f"x = {x} outside [0, {pl.k}]")
    j = bisect_left(pl.breakpoints, x)
    if j == 0:
        return pl.value_at_zero + pl.slopes[0] * x
    return pl._knots[j - 1] + pl.slopes[j] * (x - pl.breakpoints[j - 1])


# -----------------------------------------------------------------------------
# Lower envelope


def _envelope_pieces(lines: Sequence[Line], k: float, flat_tail: bool) -> List[Tuple[Line, float]]:
    ordered = sorted(lines, key=lambda L: (-L.slope, L.intercept))
    hull: List[Tuple[Line, float]] = []
    for L in ordered:
        if hull and hull[-1][0].slope == L.slope:
            # Same slope, the earlier one has the smaller intercept.
            continue
        x = 0.0
        while hull:
            top, start = hull[-1]
            x = (L.intercept - top.intercept) / (top.slope - L.slope)
            if x <= start:
                hull.pop()
                continue
            break
        if not hull:
            hull.append((L, 0.0))
            continue
        if x < k:
            hull.append((L, x))
        elif flat_tail and L.slope == 0.0:
            hull.append((L, float(k)))
    return hull


def _merge_candidate(pieces: List[Tuple[Line, float]]) -> int:
    ref = max(abs(L.slope) for L, _ in pieces)
    for j in range(len(pieces) - 1):
        m1, m2 = pieces[j][0].slope, pieces[j + 1][0].slope
        if m1 - m2 < REL_TOL * ref:
            return j
    return -1


def lower_envelope(lines: Sequence[Line], k: int, flat_tail: bool = False) -> PLFunction:
    """min of the lines over [0, k], with near-parallel neighbouring pieces merged."""
    if not lines:
        raise ValidationError("lower_envelope needs at least one line")
    lines = list(lines)
    pieces = _envelope_pieces(lines, k, flat_tail)
    while len(pieces) > 1:
        j = _merge_candidate(pieces)
        if j < 0:
            break
        (left, xl), (right, _) = pieces[j], pieces[j + 1]
        xr = pieces[j + 2][1] if j + 2 < len(pieces) else float(k)
        if flat_tail and right.slope == 0.0:
            # Keep the flat tail exact; the merged pair becomes the flat line.
            merged = right
        else:
            # Chord through the larger endpoint values lies above both lines.
            merged = Line.through(xl, max(left(xl), right(xl)), xr, max(left(xr), right(xr)))
        lines = [L for L in lines if L is not left and L is not right] + [merged]
        pieces = _envelope_pieces(lines, k, flat_tail)

    first = pieces[0][0]
    return PLFunction(
        k=k,
        breakpoints=tuple(start for _, start in pieces[1:]),
        slopes=tuple(L.slope for L, _ in pieces),
        value_at_zero=first.intercept,
        flat_tail=flat_tail,
    )


# -----------------------------------------------------------------------------
# Greedy cover


def next_line(g: ConcaveSeq, u: int, eps: float) -> Tuple[int, Line]:
    """
    The line through (u, (1+eps) g(u)) that upper-bounds g and (1+eps)-covers
    the longest run u, u+1, ..., u_next - 1.
    """
    k = g.k
    if not isinstance(u, int) or not 0 <= u <= k:
        raise DomainError(f"Start point {u} outside [0, {k}]")
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")

    # Only one or two points left to cover.
    if u >= k - 1:
        return k + 1, Line.through(k - 1, g[k - 1], k, g[k])

    top = 1.0 + eps
    y_u = top * g[u]
    slope = g[u + 1] - y_u
    w = u + 2
    while w <= k:
        gw = g[w]
        lw = y_u + slope * (w - u)
        if not leq_tol(lw, top * gw, y_u):
            break
        if lt_tol(lw, gw, y_u):
            slope = (gw - y_u) / (w - u)
        w += 1
    return w, Line(slope, y_u - slope * u)


def greedy_lines(g: ConcaveSeq, eps: float) -> List[Tuple[int, Line]]:
    """Lines of the greedy cover, each paired with the first point it covers."""
    out = []
    u = 0
    while u <= g.k:
        u_next, line = next_line(g, u, eps)
        out.append((u, line))
        u = u_next
    return out


def greedy_pl_cover(g: ConcaveSeq, eps: float) -> PLFunction:
    lines = greedy_lines(g, eps)
    pl = lower_envelope([line for _, line in lines], g.k)
    logger.debug("greedy cover: k=%d eps=%g lines=%d pieces=%d", g.k, eps, len(lines), pl.num_pieces)
    return pl


def symmetric_pl_cover(h: MonotoneConcaveSeq, eps: float) -> PLFunction:
    """
    Cover of h on [0, r] made of positive-slope pieces followed by the flat
    piece h(r).

    Greedy lines whose first covered point lies where the flat piece already
    (1+eps)-covers are dropped; that removes a trailing negative-slope line and
    a trailing positive-slope line the flat piece makes redundant.
    """
    r = h.k
    h_r = h[r]
    top = 1.0 + eps
    flat_from = r
    for i in range(r + 1):
        if leq_tol(h_r, top * h[i]):
            flat_from = i
            break

    kept = [line for u, line in greedy_lines(h, eps) if u < flat_from and line.slope > 0]
    pl = lower_envelope(kept + [Line(0.0, h_r)], r, flat_tail=True)
    logger.debug("symmetric cover: r=%d eps=%g positive pieces=%d", r, eps, pl.num_pieces - 1)
    return pl


def cover_ratio(g: ConcaveSeq, pl: PLFunction) -> float:
    """Largest l(i) / g(i) over the integers; inf if l is positive where g vanishes."""
    gv = g.values()
    lv = pl.evaluate_grid()[: gv.numel()]
    scale = max(gv.abs().max().item(), 1e-300)
    zero = gv == 0
    if (lv[zero] > REL_TOL * scale).any():
        return math.inf
    if zero.all():
        return 1.0
    return max(1.0, (lv[~zero] / gv[~zero]).max().item())


# -----------------------------------------------------------------------------
# Comparators


def _geometric_offsets(width: int, eps: float) -> List[int]:
    """
    Offsets 2 = j_0 < j_1 < ... <= width with j_{t+1} = floor(j_t (1+eps)) + 1.

    On a nondecreasing concave half with a nonnegative base, the secant at
    offset j covers every integer in [j, j (1+eps)], so consecutive offsets
    leave no gap and j_t >= 2 (1+eps)^t.
    """
    out = []
    j = 2
    while j <= width:
        out.append(j)
        j = int(math.floor(j * (1.0 + eps))) + 1
    return out


def tangent_log_cover(g: ConcaveSeq, eps: float) -> List[Line]:
    """
    Split g at its peak and cover each monotone half with the base secant
    through its two outermost points plus secants at geometrically spaced
    offsets from the outer end. At most 2 + 2 ceil(log_{1+eps} k) lines for
    eps <= 1; g must be nonnegative.
    """
    if eps <= 0:
        raise DomainError(f"tangent_log_cover needs eps > 0, got {eps}")
    k = g.k
    peak = int(torch.argmax(g.values()).item())

    def secant(i: int) -> Line:
        return Line.through(i, g[i], i + 1, g[i + 1])

    lines = []
    if peak >= 1:
        lines.append(secant(0))
        lines.extend(secant(min(j, peak - 1)) for j in _geometric_offsets(peak, eps))
    if peak <= k - 1:
        width = k - peak
        lines.append(secant(k - 1))
        # Offset j from the right end is the secant over [k - j - 1, k - j].
        lines.extend(secant(k - min(j, width - 1) - 1) for j in _geometric_offsets(width, eps))

    unique = list(dict.fromkeys(lines))
    unique.sort(key=lambda L: -L.slope)
    return unique


def clique_cover(k: int, eps: float) -> List[Line]:
    """
    Tangent lines g_t(x) = kx - 2tx + t^2 of x(k - x), stepping t so that each
    tangent picks up where the previous one stops (1+eps)-covering, starting
    from the secant (k-1)x through 0 and 1. Covers [0, k/2].
    """
    if eps <= 0:
        raise DomainError(f"clique_cover needs eps > 0, got {eps}")
    if k < 2:
        raise DomainError(f"clique_cover needs k >= 2, got {k}")

    lines = [Line(float(k - 1), 0.0)]
    z = 1.0
    while True:
        t = z + math.sqrt(z * (k - z) * eps)
        disc = max(0.0, k * k * eps * eps + 4.0 * eps * t * (k - t))
        z = t / (1.0 + eps) + k * eps / (2.0 * (1.0 + eps)) + math.sqrt(disc) / (2.0 * (1.0 + eps))
        lines.append(Line(k - 2.0 * t, t * t))
        if z >= k / 2.0:
            break
    logger.debug("clique cover: k=%d eps=%g lines=%d", k, eps, len(lines))
    return lines


def mirror_lines(lines: Sequence[Line], k: int) -> List[Line]:
    """Reflect lines about x = k/2."""
    return [Line(-L.slope, L.slope * k + L.intercept) for L in lines]


# -----------------------------------------------------------------------------
# Oracle


def _runs(mask: torch.Tensor) -> List[Tuple[int, int]]:
    runs = []
    start = None
    for i, bit in enumerate(mask.tolist()):
        if bit and start is None:
            start = i
        elif not bit and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def min_cover_oracle(g: ConcaveSeq, eps: float) -> int:
    """
    Minimum number of lines in a (1+eps)-cover of g, by exhaustive search over
    canonical lines.

    Any cover can be rewritten line by line, left to right: the line that
    covers the first uncovered point u may be replaced by the minimum-slope
    upper-bounding line through (u, (1+eps) g(u)), which reaches at least as
    far right. So the candidates are those lines for every u plus the two
    boundary secants; each covers an interval of integers and the answer is a
    shortest chain of intervals from 0 to k.
    """
    k = g.k
    if k > MIN_COVER_ORACLE_GUARD:
        raise SizeGuardError(f"min_cover_oracle is quadratic; k = {k} exceeds {MIN_COVER_ORACLE_GUARD}")
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")

    vals = g.values()
    cap = (1.0 + eps) * vals
    xs = torch.arange(k + 1, dtype=torch.float64)

    candidates = [
        Line.through(0, vals[0].item(), 1, vals[1].item()),
        Line.through(k - 1, vals[k - 1].item(), k, vals[k].item()),
    ]
    for u in range(k):
        y = cap[u].item()
        slope = ((vals[u + 1:] - y) / (xs[u + 1:] - u)).max().item()
        candidates.append(Line(slope, y - slope * u))

    intervals = []
    for L in candidates:
        lv = L.slope * xs + L.intercept
        mag = torch.maximum(lv.abs(), cap.abs())
        if not (lv >= vals - REL_TOL * mag).all():
            continue
        intervals.extend(_runs(lv <= cap + REL_TOL * mag))

    los = torch.tensor([lo for lo, _ in intervals], dtype=torch.int64)
    his = torch.tensor([hi for _, hi in intervals], dtype=torch.int64)

    best = torch.full((k + 2,), k + 2, dtype=torch.int64)
    best[0] = 0
    for x in range(k + 1):
        if best[x] > k + 1:
            continue
        reach = torch.unique(his[(los <= x) & (his >= x)] + 1)
        best[reach] = torch.minimum(best[reach], best[x] + 1)
    return int(best[k + 1])


def piece_count_bound(k: int, eps: float) -> int:
    """min{1 + floor(k/2), 2 + 2 ceil(log_{1+eps} k)}: the most pieces a greedy cover can have."""
    bound = 1 + k // 2
    if eps > 0 and k > 1:
        bound = min(bound, 2 + 2 * math.ceil(math.log(k) / math.log1p(eps)))
    return bound
