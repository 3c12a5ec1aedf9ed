import math
import typing as ty
from abc import ABC, abstractmethod
from dataclasses import dataclass

import torch

from .errors import DomainError, ValidationError
from .sequence import ConcaveSeq, MonotoneConcaveSeq
from .utils import REL_TOL, VALIDATION_TOL

# -----------------------------------------------------------------------------
# Penalty catalog: g_e(i) for a component of support size k.
# Symmetric variants are evaluated through min{i, k - i}.


@dataclass(frozen=True)  # type: ignore
class Penalty(ABC):
    name: ty.ClassVar[str] = "__TO_BE_DEFINED_IN_SUBCLASS__"

    def value(self, k: int, i: int) -> float:
        if not 0 <= i <= k:
            raise DomainError(f"Cardinality {i} outside [0, {k}]")
        self.check_support(k)
        return self._value(k, i)

    @abstractmethod
    def _value(self, k: int, i: int) -> float:
        pass

    def table(self, k: int) -> torch.Tensor:
        """g(0..k) as a float64 tensor."""
        self.check_support(k)
        return torch.tensor([self._value(k, i) for i in range(k + 1)], dtype=torch.float64)

    def check_support(self, k: int) -> None:
        if k < 1:
            raise ValidationError(f"Support size must be positive, got {k}")

    def is_symmetric(self, k: int) -> bool:
        return True

    def has_negative(self, k: int) -> bool:
        return False

    @abstractmethod
    def spec(self) -> str:
        pass

    def __str__(self):
        return self.spec()


def _min_side(k: int) -> torch.Tensor:
    i = torch.arange(k + 1, dtype=torch.float64)
    return torch.minimum(i, k - i)


@dataclass(frozen=True)
class DeltaLinear(Penalty):
    delta: float
    name: ty.ClassVar[str] = "dlin"

    def __post_init__(self):
        if not (isinstance(self.delta, (int, float)) and self.delta > 0 and math.isfinite(self.delta)):
            raise ValidationError(f"dlin threshold must be a positive real, got {self.delta}")
        object.__setattr__(self, "delta", float(self.delta))

    def _value(self, k, i):
        return float(min(i, k - i, self.delta))

    def table(self, k):
        self.check_support(k)
        return _min_side(k).clamp(max=self.delta)

    def spec(self):
        return f"dlin({self.delta!r})"


@dataclass(frozen=True)
class Clique(Penalty):
    name: ty.ClassVar[str] = "clique"

    def _value(self, k, i):
        if k == 1:
            return 0.0
        return i * (k - i) / (k - 1)

    def table(self, k):
        self.check_support(k)
        if k == 1:
            return torch.zeros(2, dtype=torch.float64)
        i = torch.arange(k + 1, dtype=torch.float64)
        return i * (k - i) / (k - 1)

    def spec(self):
        return "clique"


@dataclass(frozen=True)
class Sqrt(Penalty):
    name: ty.ClassVar[str] = "sqrt"

    def _value(self, k, i):
        return math.sqrt(min(i, k - i))

    def table(self, k):
        self.check_support(k)
        return _min_side(k).sqrt()

    def spec(self):
        return "sqrt"


@dataclass(frozen=True)
class Pow(Penalty):
    p: float
    name: ty.ClassVar[str] = "pow"

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and 0 < self.p <= 1):
            raise ValidationError(f"pow exponent must lie in (0,1], got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    def _value(self, k, i):
        return float(min(i, k - i)) ** self.p

    def spec(self):
        return f"pow({self.p!r})"


@dataclass(frozen=True)
class ExplicitAsym(Penalty):
    """Concave table g(0..k); entries may be negative until shifted."""

    values: ty.Tuple[float, ...]
    name: ty.ClassVar[str] = "vals"

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise ValidationError("vals(...) needs at least two entries")
        if any(not math.isfinite(v) for v in values):
            raise ValidationError("vals(...) entries must be finite")
        for i in range(1, len(values) - 1):
            a, b, c = values[i - 1], values[i], values[i + 1]
            if (c - b) - (b - a) > VALIDATION_TOL * max(abs(a), abs(b), abs(c)):
                raise ValidationError(f"vals(...) is not concave at index {i}")
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return len(self.values) - 1

    def check_support(self, k):
        super().check_support(k)
        if k != self.k:
            raise ValidationError(f"vals(...) has {len(self.values)} entries, support size {k} needs {k + 1}")

    def _value(self, k, i):
        return self.values[i]

    def table(self, k):
        self.check_support(k)
        return torch.tensor(self.values, dtype=torch.float64)

    def is_symmetric(self, k):
        g = self.values
        scale = max(abs(v) for v in g)
        if abs(g[0]) > REL_TOL * scale:
            return False
        return all(abs(g[i] - g[k - i]) <= REL_TOL * scale for i in range(k // 2 + 1))

    def has_negative(self, k):
        return min(self.values) < 0

    def spec(self):
        return "vals(" + ",".join(repr(v) for v in self.values) + ")"


@dataclass(frozen=True)
class ExplicitSym(Penalty):
    """Half table h(0..r), r = k // 2, with g(i) = h(min{i, k - i})."""

    values: ty.Tuple[float, ...]
    name: ty.ClassVar[str] = "symvals"

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        # Raises on h(0) != 0, decreasing or non-concave tables.
        MonotoneConcaveSeq(values)
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> int:
        return len(self.values) - 1

    def check_support(self, k):
        super().check_support(k)
        if k // 2 != self.r:
            raise ValidationError(
                f"symvals(...) has {len(self.values)} entries, support size {k} needs {k // 2 + 1}")

    def _value(self, k, i):
        return self.values[min(i, k - i)]

    def table(self, k):
        self.check_support(k)
        h = torch.tensor(self.values, dtype=torch.float64)
        return h[_min_side(k).long()]

    def spec(self):
        return "symvals(" + ",".join(repr(v) for v in self.values) + ")"


# -----------------------------------------------------------------------------
# Helpers


def is_closed_form(p: Penalty) -> bool:
    return isinstance(p, (DeltaLinear, Clique, Sqrt, Pow))


def is_symmetric(p: Penalty, k: int) -> bool:
    """g(i) = g(k - i) for all i and g(0) = 0: the conditions of the symmetric reduction."""
    return p.is_symmetric(k)


# Closed forms are sampled lazily so curve reports at k = 10^6 never build a table.
_LAZY_THRESHOLD = 4096


def penalty_sequence(p: Penalty, k: int) -> ConcaveSeq:
    p.check_support(k)
    if is_closed_form(p) and k > _LAZY_THRESHOLD:
        return ConcaveSeq.from_function(k, lambda i: p._value(k, i))
    return ConcaveSeq(p.table(k))


def symmetric_half(p: Penalty, k: int) -> MonotoneConcaveSeq:
    """h(i) = g(i) on [0, k // 2]; only meaningful when is_symmetric(p, k)."""
    p.check_support(k)
    r = k // 2
    if is_closed_form(p) and r > _LAZY_THRESHOLD:
        return MonotoneConcaveSeq.from_function(r, lambda i: p._value(k, i) if i else 0.0)
    h = p.table(k)[: r + 1].clone()
    h[0] = 0.0
    return MonotoneConcaveSeq(h)
