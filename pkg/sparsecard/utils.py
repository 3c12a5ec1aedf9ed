from typing import Iterable, Union
import torch

# Relative tolerance for comparisons inside the cover construction.
REL_TOL = 1e-12

# Looser tolerance for validating user-supplied concave tables.
VALIDATION_TOL = 1e-9


def leq_tol(a: float, b: float, *scales: float) -> bool:
    """a <= b, allowing REL_TOL relative to the largest magnitude involved."""
    mag = max(abs(a), abs(b), *(abs(s) for s in scales))
    return a <= b + REL_TOL * mag


def lt_tol(a: float, b: float, *scales: float) -> bool:
    """a < b by more than the tolerance."""
    mag = max(abs(a), abs(b), *(abs(s) for s in scales))
    return a < b - REL_TOL * mag


def as_bitset(members: Union[torch.Tensor, Iterable[int]], n: int) -> torch.BoolTensor:
    if isinstance(members, torch.Tensor):
        if members.dtype == torch.bool:
            if members.dim() != 1 or members.numel() != n:
                raise ValueError(f"Expected a bitset of length {n}, got shape {tuple(members.shape)}")
            return members
        members = members.tolist()

    bits = torch.zeros(n, dtype=torch.bool)
    for v in members:
        if not 0 <= v < n:
            raise ValueError(f"Node {v} outside [0, {n})")
        bits[v] = True
    return bits


def bitset_to_indices(bits: torch.BoolTensor) -> list:
    return torch.nonzero(bits, as_tuple=False).flatten().tolist()
