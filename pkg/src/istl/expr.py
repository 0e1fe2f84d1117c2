"""Predicate expression trees and their inclusion-function evaluation.

An expression denotes a real-valued function of the signal variables. Interval
evaluation composes the per-node inclusion functions (each exact for its own
node), yielding a natural inclusion function for the whole tree: the result
contains every value the expression can take with inputs in the given box and
constants anywhere in their intervals.

Evaluation is implemented once, vectorized over a time axis; scalar entry
points delegate to the array core with T=1 so both paths share arithmetic.
"""

from __future__ import annotations

import builtins
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    DomainError,
    EmptyArgument,
    IndeterminateForm,
    NondegenerateConstant,
    UnboundVariable,
)
from .intervals import Interval, IntervalVector

# sqrt tolerates this much negativity from rounding before it is a domain error
SQRT_CLAMP = -1e-12


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    value: Interval

    @classmethod
    def point(cls, x: float) -> "Const":
        return cls(Interval(x, x))


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Min(Expr):
    args: tuple

    def __post_init__(self):
        if len(self.args) == 0:
            raise EmptyArgument("Min of zero expressions")


@dataclass(frozen=True)
class Max(Expr):
    args: tuple

    def __post_init__(self):
        if len(self.args) == 0:
            raise EmptyArgument("Max of zero expressions")


@dataclass(frozen=True)
class Abs(Expr):
    a: Expr


@dataclass(frozen=True)
class Square(Expr):
    a: Expr


@dataclass(frozen=True)
class Sqrt(Expr):
    a: Expr


@dataclass(frozen=True)
class Dot(Expr):
    """Affine form sum_j coeffs[j] * vars[j] + offset with interval parameters."""

    coeffs: IntervalVector
    names: tuple
    offset: Interval

    def __post_init__(self):
        if len(self.coeffs) != len(self.names):
            raise ValueError("Dot coefficient/name length mismatch")


def variables(e: Expr) -> tuple:
    """Variable names referenced by e, in first-occurrence (preorder) order."""
    seen = []

    def walk(n):
        if isinstance(n, Var):
            if n.name not in seen:
                seen.append(n.name)
        elif isinstance(n, (Add, Sub, Mul)):
            walk(n.a)
            walk(n.b)
        elif isinstance(n, (Neg, Abs, Square, Sqrt)):
            walk(n.a)
        elif isinstance(n, (Min, Max)):
            for a in n.args:
                walk(a)
        elif isinstance(n, Dot):
            for nm in n.names:
                if nm not in seen:
                    seen.append(nm)

    walk(e)
    return tuple(seen)


def _col(binding: Mapping[str, int], name: str, width: int) -> int:
    try:
        j = binding[name]
    except KeyError:
        raise UnboundVariable(f"variable {name!r} is not bound") from None
    if not 0 <= j < width:
        raise UnboundVariable(f"variable {name!r} bound to column {j} outside 0..{width - 1}")
    return j


def _mul_arrays(alo, ahi, blo, bhi):
    """Four-corner interval product, elementwise over time."""
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    if np.isnan(p1).any() or np.isnan(p2).any() or np.isnan(p3).any() or np.isnan(p4).any():
        raise IndeterminateForm("indeterminate 0 * inf corner in interval product")
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return lo, hi


def eval_interval_series(e: Expr, lo: np.ndarray, hi: np.ndarray, binding: Mapping[str, int]):
    """Natural inclusion function over a (T, n) interval signal; returns (lo, hi) (T,) arrays."""
    T, width = lo.shape

    def ev(n):
        if isinstance(n, Var):
            j = _col(binding, n.name, width)
            return lo[:, j], hi[:, j]
        if isinstance(n, Const):
            return (np.full(T, n.value.lo), np.full(T, n.value.hi))
        if isinstance(n, Add):
            alo, ahi = ev(n.a)
            blo, bhi = ev(n.b)
            return alo + blo, ahi + bhi
        if isinstance(n, Sub):
            alo, ahi = ev(n.a)
            blo, bhi = ev(n.b)
            return alo - bhi, ahi - blo
        if isinstance(n, Neg):
            alo, ahi = ev(n.a)
            return -ahi, -alo
        if isinstance(n, Mul):
            alo, ahi = ev(n.a)
            blo, bhi = ev(n.b)
            return _mul_arrays(alo, ahi, blo, bhi)
        if isinstance(n, Min):
            parts = [ev(a) for a in n.args]
            out_lo = parts[0][0]
            out_hi = parts[0][1]
            for plo, phi in parts[1:]:
                out_lo = np.minimum(out_lo, plo)
                out_hi = np.minimum(out_hi, phi)
            return out_lo, out_hi
        if isinstance(n, Max):
            parts = [ev(a) for a in n.args]
            out_lo = parts[0][0]
            out_hi = parts[0][1]
            for plo, phi in parts[1:]:
                out_lo = np.maximum(out_lo, plo)
                out_hi = np.maximum(out_hi, phi)
            return out_lo, out_hi
        if isinstance(n, Abs):
            alo, ahi = ev(n.a)
            crossing = (alo <= 0.0) & (0.0 <= ahi)
            mag = np.maximum(np.abs(alo), np.abs(ahi))
            out_lo = np.where(crossing, 0.0, np.minimum(np.abs(alo), np.abs(ahi)))
            return out_lo, mag
        if isinstance(n, Square):
            alo, ahi = ev(n.a)
            s1 = alo * alo
            s2 = ahi * ahi
            crossing = (alo <= 0.0) & (0.0 <= ahi)
            out_lo = np.where(crossing, 0.0, np.minimum(s1, s2))
            return out_lo, np.maximum(s1, s2)
        if isinstance(n, Sqrt):
            alo, ahi = ev(n.a)
            if (ahi < 0.0).any():
                raise DomainError("sqrt of interval entirely below zero")
            if (alo < SQRT_CLAMP).any():
                t_bad = float(alo.min())
                raise DomainError(f"sqrt lower endpoint {t_bad} below clamp tolerance")
            return np.sqrt(np.maximum(alo, 0.0)), np.sqrt(np.maximum(ahi, 0.0))
        if isinstance(n, Dot):
            out_lo = np.full(T, n.offset.lo)
            out_hi = np.full(T, n.offset.hi)
            for j, nm in enumerate(n.names):
                k = _col(binding, nm, width)
                clo = np.full(T, n.coeffs.lo[j])
                chi = np.full(T, n.coeffs.hi[j])
                plo, phi = _mul_arrays(clo, chi, lo[:, k], hi[:, k])
                out_lo = out_lo + plo
                out_hi = out_hi + phi
            return out_lo, out_hi
        raise TypeError(f"not an expression node: {n!r}")

    return ev(e)


def eval_point_series(e: Expr, x: np.ndarray, binding: Mapping[str, int]) -> np.ndarray:
    """Pointwise evaluation over a (T, n) signal; constants must be degenerate."""
    T, width = x.shape

    def ev(n):
        if isinstance(n, Var):
            return x[:, _col(binding, n.name, width)]
        if isinstance(n, Const):
            if not n.value.is_degenerate():
                raise NondegenerateConstant(f"point evaluation of interval constant {n.value!r}")
            return np.full(T, n.value.lo)
        if isinstance(n, Add):
            return ev(n.a) + ev(n.b)
        if isinstance(n, Sub):
            return ev(n.a) - ev(n.b)
        if isinstance(n, Neg):
            return -ev(n.a)
        if isinstance(n, Mul):
            return ev(n.a) * ev(n.b)
        if isinstance(n, Min):
            out = ev(n.args[0])
            for a in n.args[1:]:
                out = np.minimum(out, ev(a))
            return out
        if isinstance(n, Max):
            out = ev(n.args[0])
            for a in n.args[1:]:
                out = np.maximum(out, ev(a))
            return out
        if isinstance(n, Abs):
            return np.abs(ev(n.a))
        if isinstance(n, Square):
            v = ev(n.a)
            return v * v
        if isinstance(n, Sqrt):
            v = ev(n.a)
            if (v < SQRT_CLAMP).any():
                raise DomainError(f"sqrt of negative value {float(v.min())}")
            return np.sqrt(np.maximum(v, 0.0))
        if isinstance(n, Dot):
            for j in range(len(n.coeffs)):
                if n.coeffs.lo[j] != n.coeffs.hi[j]:
                    raise NondegenerateConstant("point evaluation of interval Dot coefficient")
            if not n.offset.is_degenerate():
                raise NondegenerateConstant("point evaluation of interval Dot offset")
            out = np.full(T, n.offset.lo)
            for j, nm in enumerate(n.names):
                out = out + n.coeffs.lo[j] * x[:, _col(binding, nm, width)]
            return out
        raise TypeError(f"not an expression node: {n!r}")

    return ev(e)


def eval_interval(e: Expr, box: IntervalVector, binding: Mapping[str, int]) -> Interval:
    lo, hi = eval_interval_series(e, box.lo[None, :], box.hi[None, :], binding)
    return Interval(float(lo[0]), float(hi[0]))


def eval_point(e: Expr, x, binding: Mapping[str, int]) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(eval_point_series(e, x[None, :], binding)[0])


def sample_realization(e: Expr, rng: np.random.Generator) -> Expr:
    """Replace every nondegenerate interval constant with a uniform draw.

    Traversal is preorder left-to-right, so a fixed seed gives a fixed result.
    Degenerate constants pass through unchanged.
    """

    def draw(iv: Interval) -> Interval:
        if iv.is_degenerate():
            return iv
        v = float(rng.uniform(iv.lo, iv.hi))
        return Interval(v, v)

    def walk(n):
        if isinstance(n, Var):
            return n
        if isinstance(n, Const):
            return Const(draw(n.value))
        if isinstance(n, Add):
            return Add(walk(n.a), walk(n.b))
        if isinstance(n, Sub):
            return Sub(walk(n.a), walk(n.b))
        if isinstance(n, Neg):
            return Neg(walk(n.a))
        if isinstance(n, Mul):
            return Mul(walk(n.a), walk(n.b))
        if isinstance(n, Min):
            return Min(tuple(walk(a) for a in n.args))
        if isinstance(n, Max):
            return Max(tuple(walk(a) for a in n.args))
        if isinstance(n, Abs):
            return Abs(walk(n.a))
        if isinstance(n, Square):
            return Square(walk(n.a))
        if isinstance(n, Sqrt):
            return Sqrt(walk(n.a))
        if isinstance(n, Dot):
            coeffs = [draw(n.coeffs[j]) for j in range(len(n.coeffs))]
            return Dot(IntervalVector.from_intervals(coeffs), n.names, draw(n.offset))
        raise TypeError(f"not an expression node: {n!r}")

    return walk(e)


def is_monotone_nondecreasing(e: Expr) -> bool:
    """Conservative syntactic monotonicity check.

    True only when every variable occurrence sits at positive polarity (an even
    number of Neg / Sub-right flips above it), every constant is degenerate, and
    only Add/Sub/Neg/Min/Max and sign-definite degenerate Dot nodes appear.
    A True answer guarantees eval_interval(e, [x]) = [eval_point(e, x_lo),
    eval_point(e, x_hi)].
    """

    def walk(n, pol):
        if isinstance(n, Var):
            return pol > 0
        if isinstance(n, Const):
            return n.value.is_degenerate()
        if isinstance(n, Add):
            return walk(n.a, pol) and walk(n.b, pol)
        if isinstance(n, Sub):
            return walk(n.a, pol) and walk(n.b, -pol)
        if isinstance(n, Neg):
            return walk(n.a, -pol)
        if isinstance(n, (Min, Max)):
            return all(walk(a, pol) for a in n.args)
        if isinstance(n, Dot):
            if not n.offset.is_degenerate():
                return False
            for j in range(len(n.coeffs)):
                if n.coeffs.lo[j] != n.coeffs.hi[j]:
                    return False
                if pol * n.coeffs.lo[j] < 0.0:
                    return False
            return True
        # Mul/Abs/Square/Sqrt and anything else: cannot establish monotonicity
        return False

    return walk(e, +1)
