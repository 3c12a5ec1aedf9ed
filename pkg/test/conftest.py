import itertools

import pytest
import torch
from hypothesis import strategies as st

from sparsecard.gadget import GadgetGraph


@st.composite
def concave_values(draw, min_k=1, max_k=40, nonnegative=True, strict=False):
    """
    g(0..k) from nonincreasing integer increments, scaled to quarter units.
    With ``strict`` the increments are distinct, so g is strictly concave.
    """
    k = draw(st.integers(min_value=min_k, max_value=max_k))
    steps = sorted(draw(st.lists(st.integers(-20, 20), min_size=k, max_size=k, unique=strict)), reverse=True)
    start = draw(st.integers(0, 10))
    values = [float(start)]
    for s in steps:
        values.append(values[-1] + s)
    if nonnegative:
        low = min(values)
        values = [v - low for v in values]
    return [v / 4.0 for v in values]


def brute_gadget_profile(gg: GadgetGraph) -> torch.Tensor:
    """
    Minimum cut over all auxiliary placements for every subset S of the
    support, as a (2^k,) tensor indexed by the bitmask of S.
    """
    k, aux = gg.support_size, gg.aux_count
    free = k + aux
    rows = torch.arange(1 << free, dtype=torch.int64)
    side = ((rows.unsqueeze(1) >> torch.arange(free)) & 1).bool()
    # Source side gets s, sink side gets t.
    side = torch.cat((side, torch.ones(side.shape[0], 1, dtype=torch.bool),
                      torch.zeros(side.shape[0], 1, dtype=torch.bool)), dim=1)
    crossing = side[:, gg.tails] & ~side[:, gg.heads]
    cuts = (crossing.double() * gg.weights).sum(dim=1)
    # Row bits 0..k-1 are the support, bits k.. the auxiliary nodes.
    return cuts.view(1 << aux, 1 << k).min(dim=0).values


def popcounts(k: int) -> torch.Tensor:
    masks = torch.arange(1 << k, dtype=torch.int64)
    return ((masks.unsqueeze(1) >> torch.arange(k)) & 1).sum(dim=1)


@pytest.fixture
def toy_instance_text():
    return "# two nodes, one unary each, one pairwise term\n2 3\nvals(0.0,2.0) 1 1\nvals(1.0,0.0) 1 2\nsymvals(0.0,0.5) 2 1 2\n"
