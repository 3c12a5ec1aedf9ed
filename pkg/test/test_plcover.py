import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecard.errors import DomainError, SizeGuardError, ValidationError
from sparsecard.penalties import Clique, DeltaLinear, Pow, Sqrt, penalty_sequence, symmetric_half
from sparsecard.plcover import (
    Line,
    PLFunction,
    clique_cover,
    cover_ratio,
    eval_pl,
    greedy_pl_cover,
    lower_envelope,
    min_cover_oracle,
    mirror_lines,
    next_line,
    piece_count_bound,
    symmetric_pl_cover,
    tangent_log_cover,
)
from sparsecard.sequence import ConcaveSeq, MonotoneConcaveSeq

from .conftest import concave_values


def parabola(k: int) -> ConcaveSeq:
    i = torch.arange(k + 1, dtype=torch.float64)
    return ConcaveSeq(i * (k - i))


def sqrt_seq(k: int) -> ConcaveSeq:
    return ConcaveSeq(torch.arange(k + 1, dtype=torch.float64).sqrt())


def assert_sandwich(g: ConcaveSeq, pl: PLFunction, eps: float, tol: float = 1e-9):
    gv = g.values()
    lv = pl.evaluate_grid()[: gv.numel()]
    scale = max(gv.abs().max().item(), 1.0)
    assert (lv >= gv - tol * scale).all()
    assert (lv <= (1 + eps) * gv + tol * scale).all()


# -----------------------------------------------------------------------------
# PLFunction


def test_eval_pl():
    tent = PLFunction(k=2, breakpoints=(1.0,), slopes=(1.0, -1.0), value_at_zero=0.0)
    assert eval_pl(tent, 1) == 1.0
    pl = PLFunction(k=4, breakpoints=(1.0, 3.0), slopes=(3.0, 1.0, -3.0), value_at_zero=0.0)
    assert eval_pl(pl, 2) == 4.0
    assert pl.evaluate_grid().tolist() == [0.0, 3.0, 4.0, 5.0, 2.0]
    with pytest.raises(DomainError):
        eval_pl(pl, 5)


def test_plfunction_validation():
    with pytest.raises(ValidationError, match="decreasing"):
        PLFunction(k=4, breakpoints=(1.0,), slopes=(1.0, 2.0), value_at_zero=0.0)
    with pytest.raises(ValidationError):
        PLFunction(k=4, breakpoints=(4.0,), slopes=(1.0, 0.0), value_at_zero=0.0)
    flat = PLFunction(k=4, breakpoints=(4.0,), slopes=(1.0, 0.0), value_at_zero=0.0, flat_tail=True)
    assert flat(7) == 4.0


def test_lower_envelope_drops_dominated_lines():
    pl = lower_envelope([Line(1.0, 0.0), Line(-1.0, 2.0), Line(0.0, 5.0)], 2)
    assert pl.slopes == (1.0, -1.0)
    assert pl.breakpoints == (1.0,)
    assert [ln.slope for ln in pl.lines()] == [1.0, -1.0]


# -----------------------------------------------------------------------------
# Greedy


def test_next_line_linear():
    g = ConcaveSeq([0.0, 1.0, 2.0, 3.0, 4.0])
    u_next, line = next_line(g, 0, 0.0)
    assert u_next == 5
    assert line == Line(1.0, 0.0)


def test_next_line_stops_at_first_violation():
    g = ConcaveSeq([0.0, 1.0, 1.0, 0.0])
    u_next, line = next_line(g, 0, 0.0)
    assert u_next == 2
    assert line(0) == 0.0 and line(1) == 1.0


def test_next_line_sqrt_trace():
    # Starting slope sqrt(2) - 1.1 is lowered once, at w = 3; w = 7 is the first
    # point the line overshoots by more than 10%.
    g = sqrt_seq(100)
    u_next, line = next_line(g, 1, 0.1)
    slope = (math.sqrt(3) - 1.1) / 2
    assert u_next == 7
    assert line.slope == pytest.approx(slope, rel=1e-12)
    assert line.intercept == pytest.approx(1.1 - slope, rel=1e-12)
    assert line(1) == pytest.approx(1.1)
    assert line(3) == pytest.approx(math.sqrt(3))
    for w in range(1, u_next):
        assert g[w] - 1e-9 <= line(w) <= 1.1 * g[w] + 1e-9
    assert all(line(w) >= g[w] - 1e-9 for w in range(1, 101))
    assert u_next > 2
    if u_next <= 100:
        assert line(u_next) > 1.1 * g[u_next]


def test_next_line_domain():
    g = sqrt_seq(4)
    with pytest.raises(DomainError):
        next_line(g, 5, 0.1)
    with pytest.raises(DomainError):
        next_line(g, 0, -0.1)


def test_greedy_parabola_exact():
    pl = greedy_pl_cover(parabola(4), 0.0)
    assert pl.num_pieces == 3
    assert pl.slopes == (3.0, -1.0, -3.0)
    assert pl.evaluate_grid().tolist() == [0.0, 3.0, 4.0, 3.0, 0.0]


def test_greedy_constant():
    g = ConcaveSeq([2.0] * 6)
    pl = greedy_pl_cover(g, 0.0)
    assert pl.num_pieces == 1 and pl.slopes == (0.0,)
    # With slack the single line tilts but still covers everything.
    pl = greedy_pl_cover(g, 0.5)
    assert pl.num_pieces == 1
    assert_sandwich(g, pl, 0.5)


def test_greedy_parabola_large_matches_oracle():
    g = parabola(1000)
    pl = greedy_pl_cover(g, 1.0)
    assert_sandwich(g, pl, 1.0)
    assert pl.num_pieces <= piece_count_bound(1000, 1.0)
    assert pl.num_pieces == min_cover_oracle(g, 1.0)


@pytest.mark.parametrize("k", range(1, 41))
@pytest.mark.parametrize("penalty", [Clique(), Sqrt(), Pow(0.7)])
def test_exact_cover_pairs_points(penalty, k):
    # At eps = 0 every line of a strictly concave g covers exactly two points.
    assert greedy_pl_cover(penalty_sequence(penalty, k), 0.0).num_pieces == k // 2 + 1


@settings(max_examples=60, deadline=None)
@given(values=concave_values(max_k=40, strict=True))
def test_exact_cover_pairs_points_on_random_sequences(values):
    g = ConcaveSeq(values)
    assert greedy_pl_cover(g, 0.0).num_pieces == g.k // 2 + 1


def test_greedy_is_deterministic():
    for g, eps in [(sqrt_seq(500), 0.01), (parabola(300), 0.1), (penalty_sequence(Pow(0.7), 20000), 0.05)]:
        first, second = greedy_pl_cover(g, eps), greedy_pl_cover(g, eps)
        assert first.breakpoints == second.breakpoints
        assert first.slopes == second.slopes
        assert first.value_at_zero == second.value_at_zero


@settings(max_examples=60, deadline=None)
@given(values=concave_values(max_k=40), eps=st.sampled_from([0.0, 0.05, 0.3, 1.0]))
def test_greedy_is_a_cover(values, eps):
    g = ConcaveSeq(values)
    pl = greedy_pl_cover(g, eps)
    assert_sandwich(g, pl, eps)
    assert cover_ratio(g, pl) <= 1 + eps + 1e-9


# -----------------------------------------------------------------------------
# Symmetric


def test_symmetric_already_shaped():
    h = MonotoneConcaveSeq([0.0, 1.0, 2.0, 3.0, 3.0, 3.0])
    pl = symmetric_pl_cover(h, 0.0)
    assert pl.flat_tail
    assert pl.slopes == (1.0, 0.0)
    assert pl.breakpoints == (3.0,)


def test_symmetric_breakpoint_at_r():
    h = MonotoneConcaveSeq([0.0, 1.0, 2.0, 3.0, 4.0])
    pl = symmetric_pl_cover(h, 0.0)
    assert pl.slopes == (1.0, 0.0)
    assert pl.breakpoints == (4.0,)


def test_symmetric_sqrt():
    # Greedy lines start at 0 (the line x) and 2 (reaching past r); the flat
    # piece sqrt(8) covers from i = 6 on, so both are kept.
    h = MonotoneConcaveSeq(torch.arange(9, dtype=torch.float64).sqrt())
    pl = symmetric_pl_cover(h, 0.2)
    m = (math.sqrt(7) - 1.2 * math.sqrt(2)) / 5
    c = 1.2 * math.sqrt(2) - 2 * m
    assert pl.slopes == pytest.approx((1.0, m, 0.0), rel=1e-12)
    assert pl.breakpoints == pytest.approx((c / (1 - m), (math.sqrt(8) - c) / m), rel=1e-10)
    assert pl.value_at_zero == 0.0
    assert pl(8) == pytest.approx(math.sqrt(8))
    assert_sandwich(h, pl, 0.2)


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.2, 1.0])
@pytest.mark.parametrize("penalty, k", [(Clique(), 16), (Sqrt(), 40), (Pow(0.7), 25), (DeltaLinear(4.0), 30)])
def test_symmetric_positive_pieces_are_minimal(penalty, k, eps):
    # Positive pieces plus the flat piece form a cover, so no cover of this
    # shape has fewer than oracle - 1 positive pieces; greedy never needs more
    # than the unrestricted optimum.
    h = symmetric_half(penalty, k)
    positive = symmetric_pl_cover(h, eps).num_pieces - 1
    best = min_cover_oracle(h, eps)
    assert best - 1 <= positive <= best


@pytest.mark.parametrize("eps", [0.0, 0.1, 1.0])
@pytest.mark.parametrize("penalty, k", [(Clique(), 12), (Sqrt(), 31), (DeltaLinear(3.5), 20), (Pow(0.4), 9)])
def test_symmetric_cover_sandwich(penalty, k, eps):
    h = symmetric_half(penalty, k)
    pl = symmetric_pl_cover(h, eps)
    assert pl.value_at_zero == 0.0
    assert_sandwich(h, pl, eps)


# -----------------------------------------------------------------------------
# Comparators and oracle


def test_tangent_log_sqrt():
    lines = tangent_log_cover(sqrt_seq(16), 1.0)
    assert len(lines) <= 5


def test_tangent_log_linear():
    g = ConcaveSeq([0.0, 1.0, 2.0, 3.0, 4.0])
    assert greedy_pl_cover(g, 0.5).num_pieces <= len(tangent_log_cover(g, 0.5))


def test_tangent_log_parabola():
    g = parabola(100)
    tangent = len(tangent_log_cover(g, 0.1))
    assert greedy_pl_cover(g, 0.1).num_pieces <= tangent <= 2 + 2 * math.ceil(math.log(100) / math.log(1.1))


def log_bound(k: int, eps: float) -> int:
    return 2 + 2 * math.ceil(math.log(k) / math.log(1 + eps))


@settings(max_examples=80, deadline=None)
@given(values=concave_values(min_k=2, max_k=40), eps=st.sampled_from([0.01, 0.1, 0.5, 1.0]))
def test_tangent_log_is_a_cover(values, eps):
    g = ConcaveSeq(values)
    lines = tangent_log_cover(g, eps)
    pl = lower_envelope(lines, g.k)
    assert_sandwich(g, pl, eps)
    assert cover_ratio(g, pl) <= 1 + eps + 1e-9
    assert len(lines) <= log_bound(g.k, eps)


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5, 1.0])
@pytest.mark.parametrize("k", [3, 10, 100, 1000])
def test_tangent_log_named_penalties(k, eps):
    for penalty in (Clique(), Sqrt(), Pow(0.7), DeltaLinear(3.0)):
        g = penalty_sequence(penalty, k)
        lines = tangent_log_cover(g, eps)
        assert cover_ratio(g, lower_envelope(lines, k)) <= 1 + eps + 1e-9
        assert len(lines) <= log_bound(k, eps)


def test_tangent_log_steps_past_small_eps():
    # Offsets grow by at least one per line, so tiny eps costs at most k lines.
    g = sqrt_seq(2000)
    lines = tangent_log_cover(g, 1e-9)
    assert len(lines) <= 2000
    assert cover_ratio(g, lower_envelope(lines, 2000)) <= 1 + 1e-9 + 1e-9


@pytest.mark.parametrize("eps", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("k", [10 ** 3, 10 ** 4, 10 ** 5])
def test_clique_cover_lines_are_tangents(k, eps):
    lines = clique_cover(k, eps)
    # The starting line is the secant through (0, 0) and (1, k - 1).
    assert lines[0] == Line(float(k - 1), 0.0)
    xs = torch.linspace(0, k, 4001, dtype=torch.float64)
    parabola_values = xs * (k - xs)
    for line in lines[1:]:
        t = (k - line.slope) / 2
        assert 0 < t < k
        assert line.intercept == pytest.approx(t * t, rel=1e-9)
        gap = line.slope * xs + line.intercept - parabola_values
        # Above x(k - x) everywhere and touching only at x = t.
        assert torch.allclose(gap, (xs - t) ** 2, rtol=0.0, atol=1e-9 * k * k)
        assert line(t) - t * (k - t) == pytest.approx(0.0, abs=1e-9 * k * k)


# Half cover lines grow like 2 + sqrt(1/(2 eps)) from the recurrence z -> (sqrt(z) + 1)^2
# in units of k eps; this constant leaves room for the middle steps.
CLIQUE_COVER_CONSTANT = 1.5


@pytest.mark.parametrize("k", [10 ** 3, 10 ** 4, 10 ** 5])
def test_clique_cover_count_bound(k):
    eps = 0.01
    doubled = 2 * len(clique_cover(k, eps))
    bound = CLIQUE_COVER_CONSTANT * eps ** -0.5 * math.log2(math.log2(1 / eps))
    assert doubled <= bound


def test_clique_cover_single_step():
    lines = clique_cover(100, 1.0)
    assert len(lines) == 2
    t = 1 + math.sqrt(99)
    assert lines[1].slope == pytest.approx(100 - 2 * t)
    assert lines[1].intercept == pytest.approx(t * t)


@pytest.mark.parametrize("k, eps", [(1000, 0.1), (10 ** 4, 0.01)])
def test_clique_cover_doubled_is_a_cover(k, eps):
    half = clique_cover(k, eps)
    pl = lower_envelope(half + mirror_lines(half, k), k)
    assert_sandwich(parabola(k), pl, eps)


def test_mirror_lines():
    assert mirror_lines([Line(2.0, 1.0)], 4) == [Line(-2.0, 9.0)]


def test_oracle_small_cases():
    assert min_cover_oracle(parabola(4), 0.0) == 3
    assert min_cover_oracle(ConcaveSeq([0.0, 1.0, 2.0, 3.0]), 0.7) == 1
    g = sqrt_seq(50)
    assert min_cover_oracle(g, 0.1) == greedy_pl_cover(g, 0.1).num_pieces


def test_oracle_guard():
    with pytest.raises(SizeGuardError):
        min_cover_oracle(sqrt_seq(2001), 0.1)


def _named_sequences():
    out = []
    for k in (10, 37, 60):
        out.append(penalty_sequence(Clique(), k))
        out.append(ConcaveSeq([math.sqrt(i) for i in range(k + 1)]))
        out.append(ConcaveSeq([i ** 0.9 for i in range(k + 1)]))
        out.append(penalty_sequence(DeltaLinear(k / 5), k))
    return out


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.3])
def test_greedy_is_optimal_on_named_sequences(eps):
    for g in _named_sequences():
        assert greedy_pl_cover(g, eps).num_pieces == min_cover_oracle(g, eps)


@settings(max_examples=30, deadline=None)
@given(values=concave_values(max_k=60), eps=st.sampled_from([0.0, 0.05, 0.3]))
def test_greedy_is_optimal_on_random_sequences(values, eps):
    g = ConcaveSeq(values)
    assert greedy_pl_cover(g, eps).num_pieces == min_cover_oracle(g, eps)


# -----------------------------------------------------------------------------
# Piece counts


@pytest.mark.parametrize("k", [10, 100, 1000, 10000])
@pytest.mark.parametrize("eps", [0.0, 0.01, 0.1, 1.0])
def test_piece_count_bound(k, eps):
    for penalty in (Clique(), Sqrt(), Pow(0.9)):
        g = penalty_sequence(penalty, k)
        count = greedy_pl_cover(g, eps).num_pieces
        assert count <= piece_count_bound(k, eps)
        if eps > 0:
            assert count <= len(tangent_log_cover(g, eps))


def test_parabola_count_independent_of_k():
    counts = []
    for k in (10 ** 3, 10 ** 4, 10 ** 5):
        g = penalty_sequence(Clique(), k)
        count = greedy_pl_cover(g, 0.1).num_pieces
        assert count <= 2 * len(clique_cover(k, 0.1))
        counts.append(count)
    assert max(counts) - min(counts) <= 1


def test_sqrt_count_grows_with_k():
    small = greedy_pl_cover(ConcaveSeq.from_function(10 ** 3, math.sqrt), 0.01).num_pieces
    large = greedy_pl_cover(ConcaveSeq.from_function(10 ** 6, math.sqrt), 0.01).num_pieces
    assert large >= small + 2


def test_cover_ratio():
    g = ConcaveSeq([0.0, 1.0, 2.0])
    exact = PLFunction(k=2, breakpoints=(), slopes=(1.0,), value_at_zero=0.0)
    assert cover_ratio(g, exact) == 1.0
    lifted = PLFunction(k=2, breakpoints=(), slopes=(1.5,), value_at_zero=0.0)
    assert cover_ratio(g, lifted) == pytest.approx(1.5)
    positive_at_zero = PLFunction(k=2, breakpoints=(), slopes=(1.0,), value_at_zero=0.5)
    assert cover_ratio(g, positive_at_zero) == math.inf
