"""Quantitative robustness semantics, three-valued verdicts, and monitoring.

Two independent evaluation paths compute the same numbers:

* ``rho`` / ``rho_point`` follow the robustness recursion literally, one
  time step at a time (clear, and the oracle for the engine below);
* ``monitor`` / ``monitor_point`` compute one robustness signal per
  subformula bottom-up, with every windowed min/max done by a monotone-deque
  sliding-window scan, O(T) per subformula.

Both paths share the predicate evaluation core, and min/max of floats is
exact, so the engine reproduces the naive recursion bit for bit.

Until comes in two conventions, selected by ``until=``:

* ``"paper"`` (default): max over t' in [t+t1, t+t2] of
  min(rho(left, t'), min over t'' in [t+t1, t'] of rho(right, t'')).
* ``"classical"``: max over t' of min(rho(right, t'),
  min over t'' in [t, t'] of rho(left, t'')).
"""

from __future__ import annotations

import csv
import enum
import io
from collections import deque

import numpy as np

from .errors import TraceTooShort
from .expr import eval_interval_series, eval_point_series
from .formula import (
    Always,
    And,
    Eventually,
    Formula,
    Not,
    Or,
    Pred,
    Until,
    horizon,
)
from .intervals import Interval, max_inc, min_inc
from .traces import IntervalTrace, Trace

UNTIL_CONVENTIONS = ("paper", "classical")


def _check_until(until):
    if until not in UNTIL_CONVENTIONS:
        raise ValueError(f"until must be one of {UNTIL_CONVENTIONS}, got {until!r}")


class Verdict(enum.Enum):
    TRUE = "True"
    FALSE = "False"
    UNDEF = "Undef"

    def __str__(self):
        return self.value


def verdict_of(r: Interval) -> Verdict:
    """Three-valued verdict of a robustness interval (0 counts as True)."""
    if r.lo >= 0.0:
        return Verdict.TRUE
    if r.hi < 0.0:
        return Verdict.FALSE
    return Verdict.UNDEF


# --------------------------------------------------------------------------
# naive recursive evaluation
# --------------------------------------------------------------------------


def _require_window(f, T, t):
    if t < 0:
        raise ValueError(f"evaluation time must be nonnegative, got {t}")
    need = t + horizon(f) + 1
    if need > T:
        raise TraceTooShort(need, T)


def rho(f: Formula, tr: IntervalTrace, t: int = 0, until: str = "paper") -> Interval:
    """Interval robustness of f on an interval trace at step t."""
    _check_until(until)
    _require_window(f, len(tr), t)
    binding = tr.binding
    return _rho(f, tr, binding, t, until)


def _rho(f, tr, binding, t, until):
    if isinstance(f, Pred):
        slo, shi = eval_interval_series(f.expr, tr.lo[t : t + 1], tr.hi[t : t + 1], binding)
        return Interval(float(slo[0]), float(shi[0]))
    if isinstance(f, Not):
        r = _rho(f.child, tr, binding, t, until)
        return Interval(-r.hi, -r.lo)
    if isinstance(f, And):
        return min_inc([_rho(a, tr, binding, t, until) for a in f.args])
    if isinstance(f, Or):
        return max_inc([_rho(a, tr, binding, t, until) for a in f.args])
    if isinstance(f, Always):
        return min_inc(
            [_rho(f.child, tr, binding, k, until) for k in range(t + f.t1, t + f.t2 + 1)]
        )
    if isinstance(f, Eventually):
        return max_inc(
            [_rho(f.child, tr, binding, k, until) for k in range(t + f.t1, t + f.t2 + 1)]
        )
    if isinstance(f, Until):
        outer = []
        for tp in range(t + f.t1, t + f.t2 + 1):
            if until == "paper":
                inner = min_inc(
                    [_rho(f.right, tr, binding, k, until) for k in range(t + f.t1, tp + 1)]
                )
                outer.append(min_inc([_rho(f.left, tr, binding, tp, until), inner]))
            else:
                inner = min_inc(
                    [_rho(f.left, tr, binding, k, until) for k in range(t, tp + 1)]
                )
                outer.append(min_inc([_rho(f.right, tr, binding, tp, until), inner]))
        return max_inc(outer)
    raise TypeError(f"not a formula node: {f!r}")


def rho_point(f: Formula, tr: Trace, t: int = 0, until: str = "paper") -> float:
    """Real-valued robustness of f on a point trace at step t.

    Requires every predicate constant to be degenerate (a single number).
    """
    _check_until(until)
    _require_window(f, len(tr), t)
    return _rho_point(f, tr, tr.binding, t, until)


def _rho_point(f, tr, binding, t, until):
    if isinstance(f, Pred):
        s = eval_point_series(f.expr, tr.values[t : t + 1], binding)
        return float(s[0])
    if isinstance(f, Not):
        return -_rho_point(f.child, tr, binding, t, until)
    if isinstance(f, And):
        return min(_rho_point(a, tr, binding, t, until) for a in f.args)
    if isinstance(f, Or):
        return max(_rho_point(a, tr, binding, t, until) for a in f.args)
    if isinstance(f, Always):
        return min(
            _rho_point(f.child, tr, binding, k, until) for k in range(t + f.t1, t + f.t2 + 1)
        )
    if isinstance(f, Eventually):
        return max(
            _rho_point(f.child, tr, binding, k, until) for k in range(t + f.t1, t + f.t2 + 1)
        )
    if isinstance(f, Until):
        outer = []
        for tp in range(t + f.t1, t + f.t2 + 1):
            if until == "paper":
                inner = min(
                    _rho_point(f.right, tr, binding, k, until) for k in range(t + f.t1, tp + 1)
                )
                outer.append(min(_rho_point(f.left, tr, binding, tp, until), inner))
            else:
                inner = min(
                    _rho_point(f.left, tr, binding, k, until) for k in range(t, tp + 1)
                )
                outer.append(min(_rho_point(f.right, tr, binding, tp, until), inner))
        return max(outer)
    raise TypeError(f"not a formula node: {f!r}")


def verdict(f: Formula, tr: IntervalTrace, until: str = "paper") -> Verdict:
    """Three-valued verdict at step 0: True / False / Undef."""
    return verdict_of(rho(f, tr, 0, until))


def verdict_point(f: Formula, tr: Trace, until: str = "paper") -> bool:
    """Boolean verdict at step 0; robustness exactly 0 counts as satisfied."""
    return rho_point(f, tr, 0, until) >= 0.0


# --------------------------------------------------------------------------
# sliding-window monitoring engine
# --------------------------------------------------------------------------


class RobustnessTrace:
    """Robustness interval per evaluable step; degenerate for point traces."""

    __slots__ = ("rho_lo", "rho_hi")

    def __init__(self, rho_lo, rho_hi):
        rho_lo = np.asarray(rho_lo, dtype=np.float64)
        rho_hi = np.asarray(rho_hi, dtype=np.float64)
        if rho_lo.shape != rho_hi.shape or rho_lo.ndim != 1:
            raise ValueError("rho_lo/rho_hi must be equal-length 1-d arrays")
        rho_lo.setflags(write=False)
        rho_hi.setflags(write=False)
        object.__setattr__(self, "rho_lo", rho_lo)
        object.__setattr__(self, "rho_hi", rho_hi)

    def __setattr__(self, name, value):
        raise AttributeError("RobustnessTrace is immutable")

    def __len__(self):
        return self.rho_lo.shape[0]

    def __repr__(self):
        return f"RobustnessTrace(T={len(self)})"

    @property
    def values(self):
        return tuple(Interval(float(l), float(h)) for l, h in zip(self.rho_lo, self.rho_hi))

    def interval(self, t) -> Interval:
        return Interval(float(self.rho_lo[t]), float(self.rho_hi[t]))

    def verdict(self, t) -> Verdict:
        return verdict_of(self.interval(t))

    def verdicts(self):
        return tuple(self.verdict(t) for t in range(len(self)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "rho_lo", "rho_hi", "verdict"])
        for t in range(len(self)):
            w.writerow(
                [
                    t,
                    repr(float(self.rho_lo[t])),
                    repr(float(self.rho_hi[t])),
                    str(self.verdict(t)),
                ]
            )
        return buf.getvalue()


def monitor(f: Formula, tr: IntervalTrace, until: str = "paper") -> RobustnessTrace:
    """Interval robustness at every step t in [0, T - 1 - horizon(f)]."""
    _check_until(until)
    T = len(tr)
    h = horizon(f)
    if T < h + 1:
        raise TraceTooShort(h + 1, T)
    lo, hi = _series(f, tr, tr.binding, until)
    return RobustnessTrace(lo, hi)


def monitor_point(f: Formula, tr: Trace, until: str = "paper") -> RobustnessTrace:
    """Point robustness at every evaluable step, as degenerate intervals."""
    _check_until(until)
    T = len(tr)
    h = horizon(f)
    if T < h + 1:
        raise TraceTooShort(h + 1, T)
    r = _series_point(f, tr, tr.binding, until)
    return RobustnessTrace(r, r)


def _slide_min(a, w):
    """out[i] = min(a[i : i + w]); len(out) = len(a) - w + 1."""
    if w == 1:
        return a.copy()
    n = a.shape[0] - w + 1
    out = np.empty(n)
    dq = deque()
    for j in range(a.shape[0]):
        while dq and a[dq[-1]] >= a[j]:
            dq.pop()
        dq.append(j)
        if dq[0] <= j - w:
            dq.popleft()
        if j >= w - 1:
            out[j - w + 1] = a[dq[0]]
    return out


def _slide_max(a, w):
    """out[i] = max(a[i : i + w]); len(out) = len(a) - w + 1."""
    if w == 1:
        return a.copy()
    n = a.shape[0] - w + 1
    out = np.empty(n)
    dq = deque()
    for j in range(a.shape[0]):
        while dq and a[dq[-1]] <= a[j]:
            dq.pop()
        dq.append(j)
        if dq[0] <= j - w:
            dq.popleft()
        if j >= w - 1:
            out[j - w + 1] = a[dq[0]]
    return out


def _until_scan(point, held, w):
    """S[a] = max over j in [a, a+w-1] of min(point[j], min(held[a : j + 1])).

    Block decomposition: every window covers a suffix of one width-w block
    and a prefix of the next, each handled by an O(1)-per-step scan, so the
    whole pass is O(len). Valid because max_j min(c, y_j) = min(c, max_j y_j)
    lets the constant suffix-min of `held` distribute over the prefix max.
    """
    M = point.shape[0]
    n = M - w + 1
    if w == 1:
        return np.minimum(point, held)[:n]
    s1 = np.empty(M)  # within-block suffix value of S restricted to the block
    gmin = np.empty(M)  # within-block backward running min of held
    for start in range(0, M, w):
        end = min(start + w, M) - 1
        s1[end] = min(point[end], held[end])
        gmin[end] = held[end]
        for j in range(end - 1, start - 1, -1):
            s1[j] = max(min(point[j], held[j]), min(held[j], s1[j + 1]))
            gmin[j] = min(held[j], gmin[j + 1])
    u = np.empty(M)  # within-block forward max of min(point, forward min of held)
    for start in range(0, M, w):
        end = min(start + w, M) - 1
        g = held[start]
        y = min(point[start], g)
        u[start] = y
        for j in range(start + 1, end + 1):
            g = min(g, held[j])
            y = max(y, min(point[j], g))
            u[j] = y
    out = np.empty(n)
    for a in range(n):
        if a % w == 0:
            out[a] = s1[a]
        else:
            out[a] = max(s1[a], min(gmin[a], u[a + w - 1]))
    return out


def _series(f, tr, binding, until):
    """Robustness streams (lo, hi) of length T - horizon(f), entry t = rho at t."""
    if isinstance(f, Pred):
        return eval_interval_series(f.expr, tr.lo, tr.hi, binding)
    if isinstance(f, Not):
        clo, chi = _series(f.child, tr, binding, until)
        return -chi, -clo
    if isinstance(f, (And, Or)):
        parts = [_series(a, tr, binding, until) for a in f.args]
        L = min(p[0].shape[0] for p in parts)
        fold = np.minimum if isinstance(f, And) else np.maximum
        lo = parts[0][0][:L]
        hi = parts[0][1][:L]
        for plo, phi in parts[1:]:
            lo = fold(lo, plo[:L])
            hi = fold(hi, phi[:L])
        return lo, hi
    if isinstance(f, Always):
        clo, chi = _series(f.child, tr, binding, until)
        w = f.t2 - f.t1 + 1
        return _slide_min(clo[f.t1 :], w), _slide_min(chi[f.t1 :], w)
    if isinstance(f, Eventually):
        clo, chi = _series(f.child, tr, binding, until)
        w = f.t2 - f.t1 + 1
        return _slide_max(clo[f.t1 :], w), _slide_max(chi[f.t1 :], w)
    if isinstance(f, Until):
        llo, lhi = _series(f.left, tr, binding, until)
        rlo, rhi = _series(f.right, tr, binding, until)
        return (
            _until_stream_single(f, llo, rlo, until),
            _until_stream_single(f, lhi, rhi, until),
        )
    raise TypeError(f"not a formula node: {f!r}")


def _series_point(f, tr, binding, until):
    if isinstance(f, Pred):
        return eval_point_series(f.expr, tr.values, binding)
    if isinstance(f, Not):
        return -_series_point(f.child, tr, binding, until)
    if isinstance(f, (And, Or)):
        parts = [_series_point(a, tr, binding, until) for a in f.args]
        L = min(p.shape[0] for p in parts)
        fold = np.minimum if isinstance(f, And) else np.maximum
        acc = parts[0][:L]
        for p in parts[1:]:
            acc = fold(acc, p[:L])
        return acc
    if isinstance(f, Always):
        c = _series_point(f.child, tr, binding, until)
        return _slide_min(c[f.t1 :], f.t2 - f.t1 + 1)
    if isinstance(f, Eventually):
        c = _series_point(f.child, tr, binding, until)
        return _slide_max(c[f.t1 :], f.t2 - f.t1 + 1)
    if isinstance(f, Until):
        left = _series_point(f.left, tr, binding, until)
        right = _series_point(f.right, tr, binding, until)
        return _until_stream_single(f, left, right, until)
    raise TypeError(f"not a formula node: {f!r}")


def _until_stream_single(f, left, right, until):
    w = f.t2 - f.t1 + 1
    M = min(left.shape[0], right.shape[0])
    left = left[:M]
    right = right[:M]
    L = M - f.t2
    if until == "paper":
        scan = _until_scan(left, right, w)
        return scan[f.t1 : f.t1 + L]
    scan = _until_scan(right, left, w)
    if f.t1 == 0:
        return scan[:L]
    prefix = _slide_min(left, f.t1)
    return np.minimum(prefix[:L], scan[f.t1 : f.t1 + L])
