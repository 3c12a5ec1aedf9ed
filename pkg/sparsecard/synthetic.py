"""
Deterministic synthetic instances: a noisy binary segmentation benchmark on a
pixel grid, and small random mixed instances for oracle comparisons.
"""

import logging
from typing import List, Optional, Tuple

import torch

from .dsfm import Component, DSFMInstance
from .errors import ValidationError
from .penalties import Clique, DeltaLinear, ExplicitAsym, ExplicitSym, Penalty, Pow, Sqrt

logger = logging.getLogger(__name__)

PENALTY_VARIANTS = ("dlin", "clique", "sqrt", "pow", "vals", "symvals")


def _generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen


def _uniform(gen: torch.Generator, lo: float, hi: float) -> float:
    return lo + (hi - lo) * torch.rand(1, generator=gen, dtype=torch.float64).item()


def _randint(gen: torch.Generator, lo: int, hi: int) -> int:
    """Uniform integer in [lo, hi]."""
    return int(torch.randint(lo, hi + 1, (1,), generator=gen).item())


# -----------------------------------------------------------------------------
# Random concave tables


def random_concave_values(k: int, gen: torch.Generator, allow_negative: bool = False) -> Tuple[float, ...]:
    """g(0..k) with nonincreasing increments; shifted to min 0 unless negatives are allowed."""
    steps = torch.sort(torch.rand(k, generator=gen, dtype=torch.float64) * 4.0 - 2.0, descending=True).values
    start = torch.rand(1, generator=gen, dtype=torch.float64) * 2.0
    values = torch.cat((start, start + torch.cumsum(steps, dim=0)))
    if allow_negative:
        values = values - 1.0
    else:
        values = values - values.min()
    return tuple(values.tolist())


def random_symmetric_half(k: int, gen: torch.Generator) -> Tuple[float, ...]:
    r = k // 2
    steps = torch.sort(torch.rand(r, generator=gen, dtype=torch.float64), descending=True).values
    return (0.0,) + tuple(torch.cumsum(steps, dim=0).tolist())


def random_penalty(
    k: int, gen: torch.Generator, variant: Optional[str] = None, allow_negative: bool = False
) -> Penalty:
    if variant is None:
        variant = PENALTY_VARIANTS[_randint(gen, 0, len(PENALTY_VARIANTS) - 1)]
    if variant == "symvals" and k < 2:
        # A half table needs h(0) and h(1).
        variant = "vals"
    if variant == "dlin":
        return DeltaLinear(round(_uniform(gen, 0.5, 4.0), 3))
    if variant == "clique":
        return Clique()
    if variant == "sqrt":
        return Sqrt()
    if variant == "pow":
        return Pow(round(_uniform(gen, 0.1, 1.0), 3))
    if variant == "vals":
        return ExplicitAsym(random_concave_values(k, gen, allow_negative))
    if variant == "symvals":
        return ExplicitSym(random_symmetric_half(k, gen))
    raise ValidationError(f"Unknown penalty variant {variant!r}")


def random_instance(
    seed: int,
    n: int = 10,
    components: int = 5,
    max_support: int = 8,
    variants: Tuple[str, ...] = PENALTY_VARIANTS,
    allow_negative: bool = False,
) -> DSFMInstance:
    """Mixed instance; with ``allow_negative`` explicit tables may dip below zero."""
    if max_support > n:
        raise ValidationError(f"max_support {max_support} exceeds n = {n}")
    gen = _generator(seed)
    comps = []
    for _ in range(components):
        k = _randint(gen, 1, max_support)
        support = torch.randperm(n, generator=gen)[:k].sort().values.tolist()
        variant = variants[_randint(gen, 0, len(variants) - 1)]
        comps.append(Component(tuple(support), random_penalty(k, gen, variant, allow_negative)))
    return DSFMInstance(n, tuple(comps))


# -----------------------------------------------------------------------------
# Grid segmentation


def ground_truth_square(side: int) -> torch.Tensor:
    """side x side boolean mask with a centred foreground square."""
    lo, hi = side // 4, side - side // 4
    truth = torch.zeros(side, side, dtype=torch.bool)
    truth[lo:hi, lo:hi] = True
    return truth


def _place_regions(
    truth: torch.Tensor, count: int, size_range: Tuple[int, int], gen: torch.Generator
) -> List[List[int]]:
    side = truth.shape[0]
    lo_size, hi_size = size_range
    regions = []
    attempts = 0
    while len(regions) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValidationError(f"Could not place {count} regions of size {size_range} on a {side}x{side} grid")
        height = _randint(gen, 5, 9)
        w_lo, w_hi = -(-lo_size // height), hi_size // height
        if w_lo > w_hi or w_hi > side or height > side:
            continue
        width = _randint(gen, w_lo, w_hi)
        row = _randint(gen, 0, side - height)
        col = _randint(gen, 0, side - width)
        patch = truth[row:row + height, col:col + width]
        # Regions lie entirely inside one ground-truth label.
        if patch.all() or not patch.any():
            ids = torch.arange(side * side).view(side, side)[row:row + height, col:col + width]
            regions.append(ids.flatten().tolist())
    return regions


def grid_segmentation_instance(
    side: int = 50,
    regions: int = 40,
    region_size: Tuple[int, int] = (40, 80),
    seed: int = 0,
    unary_weight: float = 1.0,
    smoothness: float = 0.6,
    noise: float = 0.1,
) -> DSFMInstance:
    """
    Foreground/background labelling of a noisy binary image.

    Pixel p is node p = row * side + col and S is the foreground. Components:
    a unary mismatch cost per pixel, a pairwise smoothness term per
    4-neighbour pair and a clique penalty on each random region.
    """
    if side < 2:
        raise ValidationError(f"Grid side must be at least 2, got {side}")
    gen = _generator(seed)
    truth = ground_truth_square(side)
    flips = torch.rand(side, side, generator=gen) < noise
    observed = truth ^ flips

    comps = []
    foreground = ExplicitAsym((unary_weight, 0.0))
    background = ExplicitAsym((0.0, unary_weight))
    for p, obs in enumerate(observed.flatten().tolist()):
        comps.append(Component((p,), foreground if obs else background))

    smooth = ExplicitSym((0.0, smoothness))
    for row in range(side):
        for col in range(side):
            p = row * side + col
            if col + 1 < side:
                comps.append(Component((p, p + 1), smooth))
            if row + 1 < side:
                comps.append(Component((p, p + side), smooth))

    clique = Clique()
    for ids in _place_regions(truth, regions, region_size, gen):
        comps.append(Component(tuple(sorted(ids)), clique))

    logger.info("grid instance: side=%d components=%d noisy pixels=%d", side, len(comps), int(flips.sum()))
    return DSFMInstance(side * side, tuple(comps))
