import threading
from abc import ABC, abstractmethod
from typing import Callable, List, Optional, Sequence, Union

import torch
from tabulate import tabulate

from .errors import DomainError, ValidationError
from .utils import VALIDATION_TOL

_REPR_ROWS = 12


class SequenceBase(ABC):
    """A real function sampled at the integers 0..k."""

    @abstractmethod
    def __init__(self, k: int) -> None:
        if not isinstance(k, int) or k < 1:
            raise ValidationError(f"Support size must be a positive integer, got {k}")
        self._k = k

    @property
    def k(self) -> int:
        return self._k

    @abstractmethod
    def __getitem__(self, i: int) -> float:
        raise NotImplementedError

    def __len__(self) -> int:
        return self._k + 1

    @abstractmethod
    def values(self) -> torch.Tensor:
        raise NotImplementedError

    @property
    @abstractmethod
    def materialized(self) -> int:
        raise NotImplementedError

    def __repr__(self) -> str:
        shown = min(self.materialized, _REPR_ROWS)
        rows = [[i, self[i]] for i in range(shown)]
        if shown < len(self):
            rows.append(["...", "..."])
        tab = tabulate(rows, headers=["i", "value"], tablefmt="plain")
        return tab + "\n" + f"{type(self).__name__}, k: {self.k}, materialized: {self.materialized}"


class ConcaveSeq(SequenceBase):
    """
    Nonnegative, integer-concave g(0..k).

    Values are either an explicit table (validated up front) or a closed form
    from ``from_function`` that is materialized on demand in increasing index
    order; lazy sequences validate each point as it is first visited.
    """

    def __init__(self, values: Union[Sequence[float], torch.Tensor]) -> None:
        tensor = torch.as_tensor(values, dtype=torch.float64)
        if tensor.dim() != 1 or tensor.numel() < 2:
            raise ValidationError("ConcaveSeq expects a 1D table of at least two values")
        super().__init__(k=tensor.numel() - 1)

        self._check_table(tensor)
        self._cache: List[float] = tensor.tolist()
        self._fn: Optional[Callable[[int], float]] = None
        self._lock = threading.Lock()

    @classmethod
    def from_function(cls, k: int, fn: Callable[[int], float]):
        seq = cls.__new__(cls)
        SequenceBase.__init__(seq, k)
        seq._cache = []
        seq._fn = fn
        seq._lock = threading.Lock()
        return seq

    def __getitem__(self, i: int) -> float:
        if i < len(self._cache) and i >= 0:
            return self._cache[i]
        if not isinstance(i, int) or not 0 <= i <= self.k:
            raise DomainError(f"Index {i} outside [0, {self.k}]")
        self._materialize(i)
        return self._cache[i]

    @property
    def materialized(self) -> int:
        return len(self._cache)

    @property
    def is_lazy(self) -> bool:
        return self._fn is not None

    def values(self) -> torch.Tensor:
        if len(self._cache) <= self.k:
            self._materialize(self.k)
        return torch.tensor(self._cache, dtype=torch.float64)

    def __str__(self) -> str:
        return f"""{type(self).__name__}(
    k={self.k},
    lazy={self.is_lazy},
    materialized={self.materialized},
)"""

    def _materialize(self, stop: int) -> None:
        with self._lock:
            cache = self._cache
            while len(cache) <= stop:
                j = len(cache)
                v = float(self._fn(j))
                self._check_point(cache, j, v)
                cache.append(v)

    def _check_table(self, values: torch.Tensor) -> None:
        if not torch.isfinite(values).all():
            raise ValidationError("Sequence values must be finite")
        if (values < 0).any():
            i = int(torch.nonzero(values < 0)[0])
            raise ValidationError(f"Sequence must be nonnegative, value[{i}] = {values[i].item()}")
        if values.numel() >= 3:
            diffs = values[1:] - values[:-1]
            second = diffs[1:] - diffs[:-1]
            mag = torch.maximum(torch.maximum(values[2:].abs(), values[1:-1].abs()), values[:-2].abs())
            bad = second > VALIDATION_TOL * mag
            if bad.any():
                i = int(torch.nonzero(bad)[0]) + 1
                raise ValidationError(f"Sequence is not concave at index {i}")

    def _check_point(self, cache: List[float], j: int, v: float) -> None:
        if v != v or v in (float("inf"), float("-inf")):
            raise ValidationError(f"Sequence value at {j} is not finite")
        if v < 0:
            raise ValidationError(f"Sequence must be nonnegative, value[{j}] = {v}")
        if j >= 2:
            a, b = cache[j - 2], cache[j - 1]
            if (v - b) - (b - a) > VALIDATION_TOL * max(abs(a), abs(b), abs(v)):
                raise ValidationError(f"Sequence is not concave at index {j - 1}")


class MonotoneConcaveSeq(ConcaveSeq):
    """h(0..r) with h(0) = 0, nondecreasing and concave: one half of a symmetric penalty."""

    @property
    def r(self) -> int:
        return self.k

    def _check_table(self, values: torch.Tensor) -> None:
        super()._check_table(values)
        if values[0].item() != 0.0:
            raise ValidationError(f"Symmetric half must start at 0, got {values[0].item()}")
        diffs = values[1:] - values[:-1]
        bad = diffs < -VALIDATION_TOL * values[1:].abs()
        if bad.any():
            i = int(torch.nonzero(bad)[0]) + 1
            raise ValidationError(f"Symmetric half must be nondecreasing, decreases at index {i}")

    def _check_point(self, cache: List[float], j: int, v: float) -> None:
        super()._check_point(cache, j, v)
        if j == 0 and v != 0.0:
            raise ValidationError(f"Symmetric half must start at 0, got {v}")
        if j >= 1 and v < cache[j - 1] - VALIDATION_TOL * abs(v):
            raise ValidationError(f"Symmetric half must be nondecreasing, decreases at index {j}")
