"""Closed-interval arithmetic on IEEE doubles.

Endpoint formulas are evaluated in the native round-to-nearest mode; there is
no directed rounding. Downstream tolerances (1e-12 and coarser) dominate the
rounding error of these compositions at monitoring scale. Infinite endpoints
are allowed, NaN is rejected at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConstructionError, EmptyArgument, IndeterminateForm, DomainError


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with lo <= hi."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ConstructionError("interval endpoint is NaN")
        if lo > hi:
            raise ConstructionError(f"interval endpoints out of order: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # -- queries ------------------------------------------------------------

    def width(self) -> float:
        return self.hi - self.lo

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def issubset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __mul__(self, other):
        if isinstance(other, Interval):
            return mul(self, other)
        return scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


def make(lo: float, hi: float) -> Interval:
    return Interval(lo, hi)


def scale(a: Interval, c: float) -> Interval:
    """Scale by a real constant; endpoints swap when c < 0."""
    c = float(c)
    if math.isnan(c):
        raise ConstructionError("scale factor is NaN")
    p, q = _corner(a.lo, c), _corner(a.hi, c)
    return Interval(p, q) if p <= q else Interval(q, p)


def _corner(x: float, y: float) -> float:
    # 0 * inf has no consistent limit; reject rather than widen silently.
    p = x * y
    if math.isnan(p):
        raise IndeterminateForm(f"indeterminate product {x} * {y}")
    return p


def mul(a: Interval, b: Interval) -> Interval:
    """Exact product range via the four corner products."""
    p1 = _corner(a.lo, b.lo)
    p2 = _corner(a.lo, b.hi)
    p3 = _corner(a.hi, b.lo)
    p4 = _corner(a.hi, b.hi)
    return Interval(min(p1, p2, p3, p4), max(p1, p2, p3, p4))


def min_inc(args: Iterable[Interval]) -> Interval:
    """Tightest interval containing min(x1..xn) for xi in the arguments.

    Lower endpoint is the min of lower endpoints, upper endpoint the min of
    upper endpoints; this is the minimal inclusion function of pointwise min.
    """
    items = list(args)
    if not items:
        raise EmptyArgument("min_inc of zero intervals")
    lo = items[0].lo
    hi = items[0].hi
    for it in items[1:]:
        lo = min(lo, it.lo)
        hi = min(hi, it.hi)
    return Interval(lo, hi)


def max_inc(args: Iterable[Interval]) -> Interval:
    """Dual of min_inc: max of lower endpoints, max of upper endpoints."""
    items = list(args)
    if not items:
        raise EmptyArgument("max_inc of zero intervals")
    lo = items[0].lo
    hi = items[0].hi
    for it in items[1:]:
        lo = max(lo, it.lo)
        hi = max(hi, it.hi)
    return Interval(lo, hi)


def square(a: Interval) -> Interval:
    """Exact range of x^2: collapses to 0 on sign crossings."""
    s_lo = a.lo * a.lo
    s_hi = a.hi * a.hi
    if a.lo <= 0.0 <= a.hi:
        return Interval(0.0, max(s_lo, s_hi))
    return Interval(min(s_lo, s_hi), max(s_lo, s_hi))


def abs_inc(a: Interval) -> Interval:
    """Exact range of |x|."""
    if a.lo <= 0.0 <= a.hi:
        return Interval(0.0, max(-a.lo, a.hi))
    if a.hi < 0.0:
        return Interval(-a.hi, -a.lo)
    return Interval(a.lo, a.hi)


def sqrt_inc(a: Interval) -> Interval:
    """Exact range of sqrt(x); requires a nonnegative interval."""
    if a.lo < 0.0:
        raise DomainError(f"sqrt of interval with negative lower endpoint {a.lo}")
    return Interval(math.sqrt(a.lo), math.sqrt(a.hi))


def contains(a: Interval, x: float) -> bool:
    return a.contains(x)


def subset(a: Interval, b: Interval) -> bool:
    """a is a subset of b."""
    return a.issubset(b)


class IntervalVector:
    """Box in R^n stored as paired lo/hi float64 arrays (immutable)."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64).copy()
        hi = np.asarray(hi, dtype=np.float64).copy()
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ConstructionError("interval vector endpoints must be equal-length 1-D arrays")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ConstructionError("interval vector endpoint is NaN")
        if (lo > hi).any():
            bad = int(np.argmax(lo > hi))
            raise ConstructionError(
                f"interval vector component {bad} out of order: [{lo[bad]}, {hi[bad]}]"
            )
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalVector is immutable")

    @classmethod
    def from_intervals(cls, items: Sequence[Interval]) -> "IntervalVector":
        return cls([it.lo for it in items], [it.hi for it in items])

    @classmethod
    def degenerate(cls, x) -> "IntervalVector":
        x = np.asarray(x, dtype=np.float64)
        return cls(x, x)

    def __len__(self):
        return self.lo.shape[0]

    def __getitem__(self, i) -> Interval:
        return Interval(float(self.lo[i]), float(self.hi[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        return (
            isinstance(other, IntervalVector)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self):
        # content hash so expression nodes holding vectors stay dict-keyable;
        # +0.0 folds negative zero onto zero to keep hash consistent with ==
        return hash(((self.lo + 0.0).tobytes(), (self.hi + 0.0).tobytes()))

    def __repr__(self):
        parts = ", ".join(f"[{l!r}, {h!r}]" for l, h in zip(self.lo, self.hi))
        return f"IntervalVector({parts})"

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool((self.lo <= x).all() and (x <= self.hi).all())

    def issubset(self, other: "IntervalVector") -> bool:
        return bool((other.lo <= self.lo).all() and (self.hi <= other.hi).all())

    def widths(self) -> np.ndarray:
        return self.hi - self.lo
