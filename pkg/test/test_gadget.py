import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecard.errors import ClassMembershipError, ValidationError
from sparsecard.gadget import (
    CGFParams,
    EdgeRole,
    SymCGFParams,
    cgf_to_gadget,
    cgf_to_pl,
    gadget_cut_eval,
    gadget_cut_profile,
    pairwise_gadget,
    pl_to_cgf,
    sym_cgf_to_gadget,
    sym_cgf_to_pl,
    sym_pl_to_cgf,
    unary_gadget,
)
from sparsecard.penalties import Clique, DeltaLinear, symmetric_half
from sparsecard.plcover import PLFunction, greedy_pl_cover, symmetric_pl_cover
from sparsecard.sequence import ConcaveSeq

from .conftest import brute_gadget_profile, popcounts


def parabola(k: int) -> ConcaveSeq:
    i = torch.arange(k + 1, dtype=torch.float64)
    return ConcaveSeq(i * (k - i))


# -----------------------------------------------------------------------------
# Conversions


def test_pl_to_cgf_tent():
    tent = PLFunction(k=2, breakpoints=(1.0,), slopes=(1.0, -1.0), value_at_zero=0.0)
    params = pl_to_cgf(tent)
    assert params == CGFParams(k=2, z0=0.0, zk=0.0, a=(1.0,), b=(1.0,))


def test_pl_to_cgf_three_pieces():
    pl = PLFunction(k=4, breakpoints=(1.0, 3.0), slopes=(3.0, 1.0, -3.0), value_at_zero=0.0)
    params = pl_to_cgf(pl)
    assert params.a == (0.5, 1.0)
    assert params.b == (1.0, 3.0)
    assert params.z0 == 0.0
    assert params.zk == 0.5
    assert gadget_cut_profile(cgf_to_gadget(params)).tolist() == [0.0, 3.0, 4.0, 5.0, 2.0]


def test_pl_to_cgf_constant():
    params = pl_to_cgf(PLFunction(k=4, breakpoints=(), slopes=(0.0,), value_at_zero=2.0))
    assert params.J == 0
    assert params.z0 == 0.5 and params.zk == 0.5


def test_cgf_to_pl():
    tent = cgf_to_pl(CGFParams(k=2, z0=0.0, zk=0.0, a=(1.0,), b=(1.0,)))
    assert tent.evaluate_grid().tolist() == [0.0, 1.0, 0.0]
    constant = cgf_to_pl(CGFParams(k=3, z0=1.0, zk=1.0, a=(), b=()))
    assert constant.evaluate_grid().tolist() == [3.0, 3.0, 3.0, 3.0]


def test_cgf_round_trip_on_greedy_cover():
    g = parabola(6)
    pl = greedy_pl_cover(g, 0.0)
    back = cgf_to_pl(pl_to_cgf(pl))
    assert back.evaluate_grid().tolist() == pytest.approx(g.values().tolist(), abs=1e-12)


def test_sym_pl_to_cgf():
    capped = PLFunction(k=5, breakpoints=(3.0,), slopes=(1.0, 0.0), value_at_zero=0.0, flat_tail=True)
    assert sym_pl_to_cgf(capped) == SymCGFParams(r=5, a=(1.0,), b=(3.0,))

    two = PLFunction(k=4, breakpoints=(1.0, 3.0), slopes=(2.0, 1.0, 0.0), value_at_zero=0.0, flat_tail=True)
    params = sym_pl_to_cgf(two)
    assert params.a == (1.0, 1.0) and params.b == (1.0, 3.0)
    assert sym_cgf_to_pl(params).evaluate_grid().tolist() == [0.0, 2.0, 3.0, 4.0, 4.0]


def test_sym_pl_to_cgf_rejects_other_shapes():
    with pytest.raises(ClassMembershipError):
        sym_pl_to_cgf(PLFunction(k=2, breakpoints=(1.0,), slopes=(1.0, -1.0), value_at_zero=0.0))
    with pytest.raises(ClassMembershipError):
        sym_pl_to_cgf(PLFunction(k=2, breakpoints=(1.0,), slopes=(1.0, 0.0), value_at_zero=1.0, flat_tail=True))


def test_delta_linear_is_one_symmetric_gadget():
    pl = symmetric_pl_cover(symmetric_half(DeltaLinear(2.0), 10), 0.0)
    assert sym_pl_to_cgf(pl) == SymCGFParams(r=5, a=(1.0,), b=(2.0,))


def test_params_validation():
    with pytest.raises(ValidationError):
        CGFParams(k=3, z0=0.0, zk=0.0, a=(1.0,), b=(3.0,))
    with pytest.raises(ValidationError):
        CGFParams(k=3, z0=-1.0, zk=0.0, a=(), b=())
    with pytest.raises(ValidationError):
        SymCGFParams(r=2, a=(1.0, 1.0), b=(2.0, 1.0))


# -----------------------------------------------------------------------------
# Emission


def test_asymmetric_gadget_edges():
    gg = cgf_to_gadget(CGFParams(k=2, z0=0.0, zk=0.0, a=(1.0,), b=(1.0,)))
    assert gg.aux_count == 1
    assert len(gg) == 4
    assert gg.weights.tolist() == [1.0] * 4

    gg = cgf_to_gadget(CGFParams(k=3, z0=0.0, zk=0.0, a=(2.0,), b=(1.0,)))
    assert gg[0] == (0, 3, 4.0, EdgeRole.V_TO_AUX)
    assert gg[3] == (3, 0, 2.0, EdgeRole.AUX_TO_V)
    assert gadget_cut_eval(gg, 2) == 2.0
    assert "v->aux" in repr(gg)


def test_symmetric_gadget_edges():
    gg = sym_cgf_to_gadget(SymCGFParams(r=1, a=(1.0,), b=(1.0,)), 3)
    assert gg.aux_count == 2
    assert len(gg) == 7
    assert gadget_cut_profile(gg).tolist() == [0.0, 1.0, 1.0, 0.0]


def test_symmetric_gadget_threshold_past_r():
    gg = sym_cgf_to_gadget(SymCGFParams(r=5, a=(1.0,), b=(5000.0,)), 10)
    assert gadget_cut_profile(gg).tolist() == [min(i, 10 - i) for i in range(11)]


def test_symmetric_gadget_needs_matching_type():
    with pytest.raises(ValidationError):
        sym_cgf_to_gadget(SymCGFParams(r=2, a=(1.0,), b=(1.0,)), 7)


def test_unary_and_pairwise():
    unary = unary_gadget(0.0, 1.0)
    assert len(unary) == 1
    assert gadget_cut_profile(unary).tolist() == [0.0, 1.0]

    pair = pairwise_gadget(1.0, 3.0, 2.0)
    assert pair.aux_count == 0
    assert gadget_cut_profile(pair).tolist() == pytest.approx([1.0, 3.0, 2.0])
    with pytest.raises(ValidationError):
        pairwise_gadget(1.0, 0.0, 1.0)


def test_zero_cover_gives_empty_gadget():
    gg = cgf_to_gadget(pl_to_cgf(PLFunction(k=3, breakpoints=(), slopes=(0.0,), value_at_zero=0.0)))
    assert len(gg) == 0
    assert gadget_cut_eval(gg, 0) == 0.0


def test_sandwich_from_sqrt_cover():
    g = ConcaveSeq(torch.arange(21, dtype=torch.float64).sqrt())
    gg = cgf_to_gadget(pl_to_cgf(greedy_pl_cover(g, 0.1)))
    profile = gadget_cut_profile(gg)
    gv = g.values()
    assert (profile >= gv - 1e-9).all()
    assert (profile <= 1.1 * gv + 1e-9).all()


def test_parabola_gadget_matches_cover():
    pl = greedy_pl_cover(parabola(5), 0.0)
    gg = cgf_to_gadget(pl_to_cgf(pl))
    torch.testing.assert_close(gadget_cut_profile(gg), pl.evaluate_grid())


# -----------------------------------------------------------------------------
# Exhaustive fidelity: min over auxiliary placements equals the cover at |S|


def assert_gadget_realises(gg, expected):
    profile = brute_gadget_profile(gg)
    sizes = popcounts(gg.support_size)
    for mask in range(1 << gg.support_size):
        assert profile[mask].item() == expected[int(sizes[mask])]


def test_clique_cover_gadget_enumerated():
    h = symmetric_half(Clique(), 8)
    pl = symmetric_pl_cover(h, 1.0)
    gg = sym_cgf_to_gadget(sym_pl_to_cgf(pl), 8).quantized(10 ** 6)
    expected = [gadget_cut_eval(gg, i) for i in range(9)]
    assert_gadget_realises(gg, expected)
    grid = pl.evaluate_grid()
    for i in range(9):
        assert expected[i] == pytest.approx(grid[min(i, 8 - i)].item() * 10 ** 6, abs=8)


@st.composite
def asymmetric_params(draw):
    k = draw(st.integers(2, 10))
    J = draw(st.integers(0, min(3, k - 1)))
    b = sorted(draw(st.sets(st.integers(1, k - 1), min_size=J, max_size=J)))
    a = draw(st.lists(st.integers(1, 5), min_size=J, max_size=J))
    z0 = draw(st.integers(0, 3))
    zk = draw(st.integers(0, 3))
    return CGFParams(k=k, z0=float(z0), zk=float(zk), a=tuple(map(float, a)), b=tuple(map(float, b)))


@st.composite
def symmetric_params(draw):
    k = draw(st.integers(2, 10))
    r = k // 2
    J = draw(st.integers(1, min(3, r)))
    b = sorted(draw(st.sets(st.integers(1, r), min_size=J, max_size=J)))
    a = draw(st.lists(st.integers(1, 5), min_size=J, max_size=J))
    return k, SymCGFParams(r=r, a=tuple(map(float, a)), b=tuple(map(float, b)))


@settings(max_examples=50, deadline=None)
@given(params=asymmetric_params())
def test_asymmetric_gadget_fidelity(params):
    gg = cgf_to_gadget(params)
    expected = [cgf_to_pl(params)(i) for i in range(params.k + 1)]
    # Integer parameters make every cut value an exact integer.
    assert all(float(v).is_integer() for v in expected)
    assert_gadget_realises(gg, expected)
    assert gadget_cut_profile(gg).tolist() == expected


@settings(max_examples=50, deadline=None)
@given(case=symmetric_params())
def test_symmetric_gadget_fidelity(case):
    k, params = case
    gg = sym_cgf_to_gadget(params, k)
    half = sym_cgf_to_pl(params)
    expected = [half(min(i, k - i)) for i in range(k + 1)]
    assert_gadget_realises(gg, expected)
    assert gadget_cut_profile(gg).tolist() == expected


def test_symmetric_path_is_sparser():
    for penalty, k, eps in [(Clique(), 8, 0.0), (Clique(), 12, 0.0), (DeltaLinear(3.0), 12, 0.0)]:
        g_pl = greedy_pl_cover(ConcaveSeq(penalty.table(k)), eps)
        asym = cgf_to_gadget(pl_to_cgf(g_pl))
        sym = sym_cgf_to_gadget(sym_pl_to_cgf(symmetric_pl_cover(symmetric_half(penalty, k), eps)), k)
        assert asym.aux_count >= 2
        assert len(sym) < len(asym)
        if eps == 0.0:
            torch.testing.assert_close(gadget_cut_profile(sym), gadget_cut_profile(asym), rtol=0, atol=1e-9)
