"""Big-M MILP encoding of interval robustness over embedding trajectories,
and the receding-horizon control loop built on it.

The program solved at each step t (prediction horizon N, commitment b):

    min |u(t)|   s.t.  embedding dynamics over [t, t+N],
                       input bounds,
                       lower robustness of the spec >= 0 at every anchor
                       tau in [max(t - ||spec||, 0), t + N - max(b, ||spec||)]

Encoding scheme: the spec is put in positive normal form with affine
interval predicates. Binary variables exist only at predicate instances,
one z per (atom, time) shared across every anchor and subformula that
mentions it, enforcing

    sum_j min{a_lo*y_lo, a_lo*y_hi, a_hi*y_lo, a_hi*y_hi} + offset_lo
        + M (1 - z) >= threshold

which is big-M inactive when z = 0. All other (subformula, time) instances
get continuous activation variables in [0, 1]: conjunctions and window-min
operators force each child activation above the parent's, disjunctions and
window-max operators bound the parent by the sum of its children, and until
gets one continuous option variable per witness time capped by the witness
and held-window activations. An activation above zero therefore certifies
satisfaction (by induction the credit must bottom out in integral predicate
bits), and any true witness assignment realizes activation one, so forcing
an anchor's root activation to 1 is exact. The corner minima use continuous
auxiliaries bounded above by each non-dominated corner product; no corner
binaries are needed because predicates appear positively, so the auxiliary
floats up to the true minimum exactly when the constraint binds.

Anchors range over max(t - ||spec||, 0) <= tau <= t + N - max(b, ||spec||),
i.e. the window above intersected with the anchors whose full spec window
fits inside the prediction, so no temporal window is ever truncated and no
optimistic or pessimistic padding is needed. Every time index is enforced
under its complete window once the loop reaches it, which keeps the closed
loop sound; anchors past that range would only carry truncated provisional
constraints, and on this plant they make the step problems unsatisfiable.
Instances decided by history or by reachability bounds are folded to
constants before any variable is created. (encode() accepts an explicit
anchor for the max_robustness objective; windows that overrun the
prediction end are clipped there, vacuously true for window-min and false
for window-max.)

Two objectives: "min_input" (|u(t)|, robustness threshold 0 at every
anchor) and "max_robustness" (maximize the threshold variable at a single
anchor, typically with the inputs fixed, to read the exact robustness
lower bound out of the MILP).
"""

from __future__ import annotations

import csv
import io
import math
import time

import numpy as np

from .embedding import (
    EmbeddingState,
    LinearSystem,
    input_box_reach,
    sample_trajectory,
    simulate_embedding,
    step_embedding,
)
from .errors import (
    BadBigM,
    ConstructionError,
    HorizonMismatch,
    NonAffinePredicate,
    NotPnf,
    StepInfeasible,
    TimedOut,
    UnboundVariable,
)
from .expr import Add, Const, Dot, Expr, Mul, Neg, Sub, Var
from .formula import (
    Always,
    And,
    Eventually,
    Formula,
    Not,
    Or,
    Pred,
    Until,
    formula_variables,
    horizon,
    is_pnf,
    to_pnf,
)
from .intervals import Interval, IntervalVector, mul as interval_mul
from .milp import MilpModel, SolveResult, emit_lp, solve
from .semantics import RobustnessTrace, rho
from .traces import IntervalTrace, Trace

_SAFETY_MARGIN = 1e-9  # feasibility margin on the robustness threshold

_T, _F, _U = "true", "false", "unknown"


# --------------------------------------------------------------------------
# affine canonicalization
# --------------------------------------------------------------------------


def as_affine(e: Expr, names) -> Dot:
    """Rewrite an expression as interval-affine sum(coeff_j * var_j) + offset.

    Raises NonAffinePredicate when the expression is not affine (min, max,
    abs, squares, products of variables, ...).
    """
    coeffs, offset = _collect_affine(e)
    for nm in coeffs:
        if nm not in names:
            raise UnboundVariable(f"variable {nm!r} not among {tuple(names)}")
    used = tuple(nm for nm in names if nm in coeffs)
    lo = np.array([coeffs[nm].lo for nm in used])
    hi = np.array([coeffs[nm].hi for nm in used])
    return Dot(IntervalVector(lo, hi), used, offset)


def _collect_affine(e):
    zero = Interval(0.0, 0.0)
    if isinstance(e, Var):
        return {e.name: Interval(1.0, 1.0)}, zero
    if isinstance(e, Const):
        return {}, e.value
    if isinstance(e, Dot):
        coeffs = {}
        for j, nm in enumerate(e.names):
            coeffs[nm] = _iadd(coeffs.get(nm, zero), e.coeffs[j])
        return coeffs, e.offset
    if isinstance(e, Add):
        ca, oa = _collect_affine(e.a)
        cb, ob = _collect_affine(e.b)
        for nm, c in cb.items():
            ca[nm] = _iadd(ca.get(nm, zero), c)
        return ca, _iadd(oa, ob)
    if isinstance(e, Sub):
        ca, oa = _collect_affine(e.a)
        cb, ob = _collect_affine(e.b)
        for nm, c in cb.items():
            ca[nm] = _iadd(ca.get(nm, zero), _ineg(c))
        return ca, _iadd(oa, _ineg(ob))
    if isinstance(e, Neg):
        ca, oa = _collect_affine(e.a)
        return {nm: _ineg(c) for nm, c in ca.items()}, _ineg(oa)
    if isinstance(e, Mul):
        ca, oa = _collect_affine(e.a)
        cb, ob = _collect_affine(e.b)
        if not ca:
            scale, lin, off = oa, cb, ob
        elif not cb:
            scale, lin, off = ob, ca, oa
        else:
            raise NonAffinePredicate("product of two variable-dependent expressions")
        return {nm: interval_mul(scale, c) for nm, c in lin.items()}, interval_mul(scale, off)
    raise NonAffinePredicate(f"non-affine construct {type(e).__name__} in predicate")


def _iadd(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def _ineg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def canonicalize(spec: Formula, names) -> Formula:
    """Positive normal form with every predicate as an affine Dot."""
    f = to_pnf(spec)

    def walk(g):
        if isinstance(g, Pred):
            return Pred(as_affine(g.expr, names), name=g.name)
        if isinstance(g, And):
            return And(tuple(walk(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(walk(a) for a in g.args))
        if isinstance(g, Until):
            return Until(walk(g.left), walk(g.right), g.t1, g.t2)
        if isinstance(g, Always):
            return Always(walk(g.child), g.t1, g.t2)
        if isinstance(g, Eventually):
            return Eventually(walk(g.child), g.t1, g.t2)
        if isinstance(g, Not):
            raise NotPnf("negation survived normal-form conversion")
        raise TypeError(f"not a formula node: {g!r}")

    return walk(f)


# --------------------------------------------------------------------------
# problem container
# --------------------------------------------------------------------------


class SynthesisProblem:
    """One receding-horizon step: history, current state box, spec, horizon."""

    __slots__ = (
        "sys",
        "spec",
        "canonical",
        "t",
        "history",
        "state",
        "N",
        "b",
        "big_M",
        "until",
        "spec_horizon",
    )

    def __init__(self, sys, spec, t, history, state, N=16, b=1, big_M="auto", until="paper"):
        if not isinstance(sys, LinearSystem):
            raise ConstructionError("sys must be a LinearSystem")
        if until not in ("paper", "classical"):
            raise ValueError(f"until must be 'paper' or 'classical', got {until!r}")
        N = int(N)
        b = int(b)
        if N < 1:
            raise HorizonMismatch(f"prediction horizon N must be >= 1, got {N}")
        if not (1 <= b <= N):
            raise HorizonMismatch(f"commitment b must satisfy 1 <= b <= N, got b={b}, N={N}")
        t = int(t)
        if t < 0:
            raise ConstructionError(f"time index must be nonnegative, got {t}")
        if not isinstance(history, IntervalTrace):
            raise ConstructionError("history must be an IntervalTrace of past outputs")
        if history.names != sys.output_names:
            raise ConstructionError(
                f"history variables {history.names} != system outputs {sys.output_names}"
            )
        if len(history) != t + 1:
            raise ConstructionError(
                f"history must cover steps 0..t ({t + 1} samples), got {len(history)}"
            )
        if not isinstance(state, EmbeddingState):
            raise ConstructionError("state must be an EmbeddingState")
        if state.x_lo.shape[0] != sys.n:
            raise ConstructionError("state dimension does not match the system")
        missing = [nm for nm in formula_variables(spec) if nm not in sys.output_names]
        if missing:
            raise UnboundVariable(f"spec variables {missing} are not system outputs")
        if big_M != "auto":
            big_M = float(big_M)
            if not (big_M > 0 and math.isfinite(big_M)):
                raise BadBigM(f"big_M must be positive and finite, got {big_M}")
        canonical = canonicalize(spec, sys.output_names)
        h = horizon(canonical)
        if N < h:
            raise HorizonMismatch(
                f"prediction horizon N={N} is shorter than the spec horizon {h}"
            )
        object.__setattr__(self, "sys", sys)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "canonical", canonical)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "history", history)
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "big_M", big_M)
        object.__setattr__(self, "until", until)
        object.__setattr__(self, "spec_horizon", h)

    def __setattr__(self, name, value):
        raise AttributeError("SynthesisProblem is immutable")

    @property
    def anchors(self):
        """Times whose robustness is constrained: the lookback window up to
        the last anchor whose full spec window the prediction covers."""
        last = self.t + self.N - max(self.b, self.spec_horizon)
        return range(max(self.t - self.spec_horizon, 0), last + 1)

    @property
    def end(self):
        """Last time index with a predicted signal value."""
        return self.t + self.N

    def predicted_trace(self, u_plan) -> IntervalTrace:
        """History plus the embedding rollout of a candidate input plan."""
        future = simulate_embedding(self.sys, self.state, u_plan)
        lo = np.vstack([self.history.lo, future.lo[1:]])
        hi = np.vstack([self.history.hi, future.hi[1:]])
        return IntervalTrace(self.sys.output_names, lo, hi)


# --------------------------------------------------------------------------
# encoder
# --------------------------------------------------------------------------


class EncodeResult:
    """MILP plus the variable maps needed to read a solution back."""

    __slots__ = (
        "model",
        "problem",
        "objective",
        "anchor_list",
        "infeasible_anchors",
        "folded_true_anchors",
        "u_vars",
        "abs_vars",
        "rho_var",
        "big_M",
        "audit_rows",
        "z_vars",
        "atom_vars",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            object.__setattr__(self, k, kw[k])

    def __setattr__(self, name, value):
        raise AttributeError("EncodeResult is immutable")

    def extract_inputs(self, x) -> np.ndarray:
        out = np.empty((len(self.u_vars), len(self.u_vars[0])))
        for k, row in enumerate(self.u_vars):
            for i, j in enumerate(row):
                out[k, i] = x[j]
        return out

    def audit_big_m(self, x, tol=1e-6):
        """Check the big-M rows at a solution; returns violations.

        An active predicate bit (z = 1) must meet its threshold. An inactive
        bit (z = 0) must keep the unit slack its M was sized to provide, so a
        too-small M would show up here; that slack check is skipped when the
        caller supplied an explicit big_M with no sizing guarantee.
        """
        bad = []
        thr = 0.0 if self.rho_var is None else x[self.rho_var]
        auto = self.problem.big_M == "auto"
        for row in self.audit_rows:
            z = x[row["z"]]
            lam = row["const"] + sum(c * x[j] for j, c in row["terms"])
            if z >= 1.0 - tol:
                if lam - thr < -tol * max(1.0, abs(thr)):
                    bad.append((row["name"], float(lam - thr)))
            elif z <= tol and auto:
                slack = lam + row["M"] * (1.0 - z) - thr
                if slack < 0.5:
                    bad.append((row["name"], float(slack)))
        return bad


def _pred_lower_bounds(dot: Dot, box_lo, box_hi, name_index):
    """Range of the predicate's lower-endpoint value over a signal box.

    box_lo/box_hi bound the signal value itself (the interval signal's
    endpoints both live in [box_lo, box_hi]). Returns (lam_min, lam_max).
    """
    lam_min = dot.offset.lo
    lam_max = dot.offset.lo
    for j, nm in enumerate(dot.names):
        a_lo, a_hi = dot.coeffs.lo[j], dot.coeffs.hi[j]
        r_lo, r_hi = box_lo[name_index[nm]], box_hi[name_index[nm]]
        corners = (a_lo * r_lo, a_lo * r_hi, a_hi * r_lo, a_hi * r_hi)
        lam_min += min(corners)
        # widest box minimizes the corner-min; degenerate signals maximize it,
        # and g(y) = min(a_lo*y, a_hi*y) is piecewise linear concave with its
        # kink at y = 0, so the candidates are the endpoints plus the kink
        best = max(min(a_lo * r_lo, a_hi * r_lo), min(a_lo * r_hi, a_hi * r_hi))
        if a_lo < 0.0 < a_hi and r_lo < 0.0 < r_hi:
            best = max(best, 0.0)
        lam_max += best
    return lam_min, lam_max


def _superlevel_interval(a_lo, a_hi, c, r_lo, r_hi):
    """{y in [r_lo, r_hi] : min(a_lo*y, a_hi*y) >= c}, or None when empty.

    The corner-min is concave piecewise linear in y with its kink at 0, so
    the superlevel set is a single interval.
    """
    if a_lo > 0.0:
        right = (max(0.0, c / a_lo), math.inf)
    elif a_lo == 0.0:
        right = (0.0, math.inf) if c <= 0.0 else None
    else:
        right = (0.0, c / a_lo) if c <= 0.0 else None
    if a_hi > 0.0:
        left = (c / a_hi, 0.0) if c <= 0.0 else None
    elif a_hi == 0.0:
        left = (-math.inf, 0.0) if c <= 0.0 else None
    else:
        left = (-math.inf, min(0.0, c / a_hi))
    if right is None and left is None:
        return None
    lo = left[0] if left is not None else right[0]
    hi = right[1] if right is not None else left[1]
    lo, hi = max(lo, r_lo), min(hi, r_hi)
    return (lo, hi) if lo <= hi else None


def _pred_value_range(dot: Dot, box_lo, box_hi, name_index):
    """Full interval of predicate values over a signal box (for big-M sizing)."""
    lo = dot.offset.lo
    hi = dot.offset.hi
    for j, nm in enumerate(dot.names):
        a_lo, a_hi = dot.coeffs.lo[j], dot.coeffs.hi[j]
        r_lo, r_hi = box_lo[name_index[nm]], box_hi[name_index[nm]]
        corners = (a_lo * r_lo, a_lo * r_hi, a_hi * r_lo, a_hi * r_hi)
        lo += min(corners)
        hi += max(corners)
    return lo, hi


class _Encoder:
    def __init__(self, problem: SynthesisProblem, objective, anchor, fixed_inputs):
        self.p = problem
        self.objective = objective
        self.sys = problem.sys
        self.t = problem.t
        self.end = problem.end
        self.until = problem.until
        if fixed_inputs is not None:
            fixed_inputs = np.atleast_2d(np.asarray(fixed_inputs, dtype=np.float64))
            if fixed_inputs.shape != (problem.N, self.sys.m):
                raise ConstructionError(
                    f"fixed inputs must have shape ({problem.N}, {self.sys.m}),"
                    f" got {fixed_inputs.shape}"
                )
        self.fixed_inputs = fixed_inputs
        if objective == "max_robustness":
            self.anchor_list = [problem.t if anchor is None else int(anchor)]
        else:
            self.anchor_list = list(problem.anchors)
        for a in self.anchor_list:
            if not (0 <= a <= self.end):
                raise HorizonMismatch(f"anchor {a} outside [0, {self.end}]")
        self.name_index = {nm: i for i, nm in enumerate(self.sys.output_names)}
        self._global_M_cache = None
        self._signal_bounds()
        self.model = MilpModel(name=f"synth_t{self.t}")
        self.vfold_memo = {}
        self.z_vars = {}
        self.atom_vars = {}
        self._atom_ids = {}
        self.audit_rows = []
        self.infeasible_anchors = []
        self.folded_true_anchors = []

    # -- signal bounds per time step -------------------------------------------

    def _signal_bounds(self):
        """sig_lo/sig_hi[s] bound the output value at step s (history exact)."""
        p = self.p
        n_out = len(self.sys.output_names)
        T = self.end + 1
        self.sig_lo = np.empty((T, n_out))
        self.sig_hi = np.empty((T, n_out))
        self.sig_lo[: self.t + 1] = p.history.lo
        self.sig_hi[: self.t + 1] = p.history.hi
        if self.fixed_inputs is None:
            reach_lo, reach_hi = input_box_reach(self.sys, p.state, p.N)
        else:
            # inputs pinned: roll the embedding forward on them so the boxes
            # carry only the disturbance spread
            A, B = self.sys.A, self.sys.B
            reach_lo = np.empty((p.N + 1, self.sys.n))
            reach_hi = np.empty((p.N + 1, self.sys.n))
            reach_lo[0] = p.state.x_lo
            reach_hi[0] = p.state.x_hi
            for k in range(p.N):
                push = B @ self.fixed_inputs[k]
                reach_lo[k + 1] = A @ reach_lo[k] + push + self.sys.w_lo
                reach_hi[k + 1] = A @ reach_hi[k] + push + self.sys.w_hi
        idx = list(self.sys.output_indices)
        self.sig_lo[self.t + 1 :] = reach_lo[1:, idx]
        self.sig_hi[self.t + 1 :] = reach_hi[1:, idx]
        self.state_lo = reach_lo  # (N+1, n), bounds for the state variables
        self.state_hi = reach_hi
        if not (np.isfinite(reach_lo).all() and np.isfinite(reach_hi).all()):
            raise BadBigM("reachable boxes are unbounded; cannot derive big-M")

    def _global_big_m(self):
        if self.p.big_M != "auto":
            return self.p.big_M
        if self._global_M_cache is not None:
            return self._global_M_cache
        worst = 0.0
        for pred in self._preds(self.p.canonical):
            for s in range(self.end + 1):
                lo, hi = _pred_value_range(pred.expr, self.sig_lo[s], self.sig_hi[s], self.name_index)
                worst = max(worst, abs(lo), abs(hi))
        M = 2.0 * worst + 1.0
        if not math.isfinite(M):
            raise BadBigM("predicate values unbounded over the reachable boxes")
        self._global_M_cache = M
        return M

    def _preds(self, f):
        if isinstance(f, Pred):
            yield f
        elif isinstance(f, (And, Or)):
            for a in f.args:
                yield from self._preds(a)
        elif isinstance(f, Until):
            yield from self._preds(f.left)
            yield from self._preds(f.right)
        elif isinstance(f, (Always, Eventually)):
            yield from self._preds(f.child)

    # -- interval folding ---------------------------------------------------

    def vfold(self, f, s):
        """Bounds on the robustness value of (subformula, time) over the
        signal boxes, valid pointwise for every trajectory the model admits."""
        key = (f, s)
        got = self.vfold_memo.get(key)
        if got is None:
            got = self._vfold(f, s)
            self.vfold_memo[key] = got
        return got

    def _vfold(self, f, s):
        if isinstance(f, Pred):
            return _pred_lower_bounds(f.expr, self.sig_lo[s], self.sig_hi[s], self.name_index)
        if isinstance(f, And):
            vals = [self.vfold(a, s) for a in f.args]
            return (min(v[0] for v in vals), min(v[1] for v in vals))
        if isinstance(f, Or):
            vals = [self.vfold(a, s) for a in f.args]
            return (max(v[0] for v in vals), max(v[1] for v in vals))
        if isinstance(f, Always):
            hi = min(s + f.t2, self.end)
            vals = [self.vfold(f.child, k) for k in range(s + f.t1, hi + 1)]
            if not vals:
                return (math.inf, math.inf)
            return (min(v[0] for v in vals), min(v[1] for v in vals))
        if isinstance(f, Eventually):
            hi = min(s + f.t2, self.end)
            vals = [self.vfold(f.child, k) for k in range(s + f.t1, hi + 1)]
            if not vals:
                return (-math.inf, -math.inf)
            return (max(v[0] for v in vals), max(v[1] for v in vals))
        if isinstance(f, Until):
            point = f.left if self.until == "paper" else f.right
            held = f.right if self.until == "paper" else f.left
            lo = hi = -math.inf
            for tp, window in self._until_options(f, s):
                vals = [self.vfold(point, tp)] + [self.vfold(held, k) for k in window]
                lo = max(lo, min(v[0] for v in vals))
                hi = max(hi, min(v[1] for v in vals))
            return (lo, hi)
        raise NotPnf(f"unexpected node in normal form: {type(f).__name__}")

    def fold(self, f, s):
        """Three-valued verdict at the same margin the atom value rows use."""
        if self.objective == "max_robustness":
            return _U  # threshold is a variable; sign-folding does not apply
        lo, hi = self.vfold(f, s)
        if lo >= _SAFETY_MARGIN:
            return _T
        if hi < _SAFETY_MARGIN:
            return _F
        return _U

    @staticmethod
    def _keep_min(items):
        """Prune min-combined children that can never be the smallest.

        items are (payload, (lo, hi)) pairs. The child with the least upper
        bound stays; any other child whose lower bound clears that upper
        bound is at least as large at every admissible trajectory, so its
        constraints are implied by the kept one and add nothing.
        """
        if len(items) < 2:
            return items
        j = min(range(len(items)), key=lambda i: items[i][1][1])
        cap = items[j][1][1]
        return [it for i, it in enumerate(items) if i == j or it[1][0] < cap]

    @staticmethod
    def _keep_max(items):
        """Dual pruning for max-combined children: drop options whose upper
        bound never beats the best lower bound."""
        if len(items) < 2:
            return items
        j = max(range(len(items)), key=lambda i: items[i][1][0])
        floor = items[j][1][0]
        return [it for i, it in enumerate(items) if i == j or it[1][1] > floor]

    def _until_options(self, f, s):
        """(witness time, held-window times) pairs, clipped at the horizon end."""
        held_start = s + f.t1 if self.until == "paper" else s
        out = []
        for tp in range(s + f.t1, min(s + f.t2, self.end) + 1):
            out.append((tp, list(range(held_start, tp + 1))))
        return out

    # -- model construction -----------------------------------------------------

    def build(self) -> EncodeResult:
        p = self.p
        m = self.model
        sysm = self.sys
        self.global_M = self._global_big_m()

        # inputs
        self.u_vars = []
        for k in range(p.N):
            row = []
            for i in range(sysm.m):
                row.append(m.add_var(f"u_{p.t + k}_{i}", sysm.u_lo[i], sysm.u_hi[i]))
            self.u_vars.append(row)
        if self.fixed_inputs is not None:
            for k in range(p.N):
                for i in range(sysm.m):
                    m.fix(self.u_vars[k][i], self.fixed_inputs[k, i])

        # objective
        self.abs_vars = []
        self.rho_var = None
        if self.objective == "min_input":
            for i in range(sysm.m):
                cap = max(abs(sysm.u_lo[i]), abs(sysm.u_hi[i]))
                a = m.add_var(f"abs_u_{p.t}_{i}", 0.0, cap)
                m.add_ge({a: 1.0, self.u_vars[0][i]: -1.0}, 0.0, name=f"absp_{i}")
                m.add_ge({a: 1.0, self.u_vars[0][i]: 1.0}, 0.0, name=f"absn_{i}")
                self.abs_vars.append(a)
            m.set_objective({a: 1.0 for a in self.abs_vars})
        else:
            # rho is bracketed by the folded root value; that caps every
            # per-row slack at its real worst case instead of the global M
            vlo, vhi = self.vfold(p.canonical, self.anchor_list[0])
            lob = max(vlo, -self.global_M)
            hib = max(min(vhi, self.global_M), lob)
            self.rho_var = m.add_var("rho_lb", lob, hib)
            self._rho_cap = hib
            m.set_objective({self.rho_var: -1.0})  # maximize

        # embedding endpoints as explicit affine functions of the inputs:
        # x_lo(t+k) = A^k x_lo(t) + sum_{j<k} A^(k-1-j) (B u_j + w_lo), same
        # for x_hi with w_hi, so predicate rows reference inputs directly and
        # the model carries no state variables or dynamics equalities
        n = sysm.n
        ABd = [sysm.B.copy()]  # ABd[d] = A^d B
        for _ in range(1, p.N):
            ABd.append(sysm.A @ ABd[-1])
        self._AB = ABd
        self._c_lo = np.empty((p.N + 1, n))
        self._c_hi = np.empty((p.N + 1, n))
        self._c_lo[0] = p.state.x_lo
        self._c_hi[0] = p.state.x_hi
        for k in range(p.N):
            self._c_lo[k + 1] = sysm.A @ self._c_lo[k] + sysm.w_lo
            self._c_hi[k + 1] = sysm.A @ self._c_hi[k] + sysm.w_hi

        self._node_ids = {}
        self._pred_count = 0

        # anchor roots
        for a in self.anchor_list:
            v = self.fold(p.canonical, a)
            if v == _T:
                self.folded_true_anchors.append(a)
                continue
            if v == _F:
                self.infeasible_anchors.append(a)
                m.add_ge({}, 1.0, name=f"anchor_{a}_infeasible")
                continue
            z = self._z(p.canonical, a)
            m.lb[z] = 1.0  # required outright

        if self.objective == "min_input":
            self._exclusivity_cuts()

        return EncodeResult(
            model=m,
            problem=p,
            objective=self.objective,
            anchor_list=list(self.anchor_list),
            infeasible_anchors=list(self.infeasible_anchors),
            folded_true_anchors=list(self.folded_true_anchors),
            u_vars=[list(r) for r in self.u_vars],
            abs_vars=list(self.abs_vars),
            rho_var=self.rho_var,
            big_M=self.global_M,
            audit_rows=list(self.audit_rows),
            z_vars=dict(self.z_vars),
            atom_vars=dict(self.atom_vars),
        )

    def _node_id(self, f):
        nid = self._node_ids.get(f)
        if nid is None:
            if isinstance(f, Pred) and f.name:
                nid = f.name
            elif isinstance(f, Pred):
                nid = f"p{self._pred_count}"
                self._pred_count += 1
            else:
                nid = f"n{len(self._node_ids)}"
            self._node_ids[f] = nid
        return nid

    def _z(self, f, s):
        """Activation variable for (subformula, time); builds its constraints.

        Predicates return their shared integer bit. Everything else is a
        continuous [0, 1] variable: min-type nodes push each child activation
        above their own, max-type nodes are capped by the sum of their
        children, so positive activation always traces down to true bits.
        """
        if isinstance(f, Pred):
            return self._atom(f, s)
        key = (f, s)
        got = self.z_vars.get(key)
        if got is not None:
            return got
        nid = self._node_id(f)
        m = self.model
        z = m.add_var(f"a_{nid}_{s}", 0.0, 1.0)
        self.z_vars[key] = z
        if isinstance(f, And):
            kept = self._keep_min([((g, s), self.vfold(g, s)) for g in f.args])
            for (g, k), _ in kept:
                self._require(g, k, z)
        elif isinstance(f, Always):
            hi = min(s + f.t2, self.end)
            insts = [(f.child, k) for k in range(s + f.t1, hi + 1)]
            for (g, k), _ in self._keep_min([(gk, self.vfold(*gk)) for gk in insts]):
                self._require(g, k, z)
        elif isinstance(f, Or):
            opts = [(a, s) for a in f.args if self.fold(a, s) != _F]
            kept = self._keep_max([(gk, self.vfold(*gk)) for gk in opts])
            self._credit(z, nid, s, [self._z(g, k) for (g, k), _ in kept])
        elif isinstance(f, Eventually):
            hi = min(s + f.t2, self.end)
            opts = [
                (f.child, k)
                for k in range(s + f.t1, hi + 1)
                if self.fold(f.child, k) != _F
            ]
            kept = self._keep_max([(gk, self.vfold(*gk)) for gk in opts])
            self._credit(z, nid, s, [self._z(g, k) for (g, k), _ in kept])
        elif isinstance(f, Until):
            point = f.left if self.until == "paper" else f.right
            held = f.right if self.until == "paper" else f.left
            options = []
            for tp, window in self._until_options(f, s):
                reqs = [(point, tp)] + [(held, k) for k in window]
                if any(self.fold(g, k) == _F for g, k in reqs):
                    continue
                vals = [self.vfold(g, k) for g, k in reqs]
                bound = (min(v[0] for v in vals), min(v[1] for v in vals))
                options.append(((tp, reqs), bound))
            credits = []
            for (tp, reqs), _ in self._keep_max(options):
                live = [(g, k) for g, k in reqs if self.fold(g, k) != _T]
                if not live:
                    # the option already holds on known data; z is free
                    return z
                live = self._keep_min([(gk, self.vfold(*gk)) for gk in live])
                if len(live) == 1:
                    credits.append(self._z(*live[0][0]))
                    continue
                w = m.add_var(f"w_{nid}_{s}_{tp}", 0.0, 1.0)
                for (g, k), _ in live:
                    m.add_ge({self._z(g, k): 1.0, w: -1.0}, 0.0)
                credits.append(w)
            self._credit(z, nid, s, credits)
        else:
            raise NotPnf(f"unexpected node in normal form: {type(f).__name__}")
        return z

    def _require(self, f, s, parent_z):
        """An active parent forces f's activation at s up with it."""
        if self.fold(f, s) == _T:
            return
        child = self._z(f, s)
        self.model.add_ge({child: 1.0, parent_z: -1.0}, 0.0)

    def _credit(self, z, nid, s, children):
        """Cap a max-type activation by the sum of its children."""
        if not children:
            # fold() returned unknown but every option is gone: unreachable for
            # min_input; in max_robustness an empty window is plain infeasible
            self.model.add_ge({z: -1.0}, 0.0, name=f"empty_window_{nid}_{s}")
            return
        row = {z: -1.0}
        for c in children:
            row[c] = row.get(c, 0.0) + 1.0
        self.model.add_ge(row, 0.0)

    def _atom(self, f: Pred, s):
        """Shared integer bit for an affine atom at one time step.

        The bit and its big-M value row are created once per (atom, time) no
        matter how many anchors or subformulas reference it.
        """
        key = (f.expr, s)
        got = self.atom_vars.get(key)
        if got is not None:
            return got
        aid = self._atom_ids.get(f.expr)
        if aid is None:
            aid = self._node_id(f)
            taken = set(self._atom_ids.values())
            if aid in taken:
                # same label on a different atom (e.g. a negated predicate
                # keeps its source name); keep ids unique for the model
                k = 2
                while f"{aid}_{k}" in taken:
                    k += 1
                aid = f"{aid}_{k}"
            self._atom_ids[f.expr] = aid
        z = self.model.add_binary(f"z_{aid}_{s}")
        self.atom_vars[key] = z
        self._pred_rows(f, s, z, aid)
        return z

    def _exclusivity_cuts(self):
        """Valid rows z_a + z_b <= 1 for provably incompatible atom pairs.

        Only single-variable atoms over the same signal are compared, at the
        same margin the predicate rows enforce: if their feasible signal
        intervals are disjoint, both bits can never be 1 together. The cuts
        change no integral solution, they only tighten the LP relaxation.
        """
        m = self.model
        by_time = {}
        for (dot, s), var in self.atom_vars.items():
            if len(dot.names) == 1:
                by_time.setdefault((s, dot.names[0]), []).append((dot, var))
        for (s, nm), atoms in sorted(by_time.items()):
            if len(atoms) < 2:
                continue
            r_lo = self.sig_lo[s][self.name_index[nm]]
            r_hi = self.sig_hi[s][self.name_index[nm]]
            spans = []
            for dot, var in atoms:
                c = _SAFETY_MARGIN - dot.offset.lo
                spans.append(
                    (var, _superlevel_interval(dot.coeffs.lo[0], dot.coeffs.hi[0], c, r_lo, r_hi))
                )
            for i, (vi, si) in enumerate(spans):
                for vj, sj in spans[i + 1 :]:
                    if si is None or sj is None:
                        continue  # dead bit; its own value row pins it
                    if max(si[0], sj[0]) > min(si[1], sj[1]):
                        m.add_le(
                            {vi: 1.0, vj: 1.0},
                            1.0,
                            name=f"excl_{m.var_names[vi]}_{m.var_names[vj]}",
                        )

    def _emit_endpoint(self, coeffs, k, state_idx, coef, lower):
        """Add coef * (state endpoint at step t+k) to a row; returns the
        constant part (everything but the input terms)."""
        base = self._c_lo if lower else self._c_hi
        for j in range(k):
            w = self._AB[k - 1 - j][state_idx]
            for q in range(self.sys.m):
                if w[q] != 0.0:
                    var = self.u_vars[j][q]
                    coeffs[var] = coeffs.get(var, 0.0) + coef * w[q]
        return coef * base[k][state_idx]

    def _pred_rows(self, f: Pred, s, z, nid):
        """lambda(s) + M (1 - z) >= threshold, with exact corner auxiliaries."""
        m = self.model
        dot = f.expr
        lam_min, _ = _pred_lower_bounds(dot, self.sig_lo[s], self.sig_hi[s], self.name_index)
        row = {}  # lambda's variable terms
        const = dot.offset.lo
        if s <= self.t:
            # history: the whole value is a known constant
            const, _ = _pred_lower_bounds(
                dot, self.p.history.lo[s], self.p.history.hi[s], self.name_index
            )
        else:
            k = s - self.t
            for j, nm in enumerate(dot.names):
                a_lo, a_hi = dot.coeffs.lo[j], dot.coeffs.hi[j]
                out_idx = self.sys.output_indices[self.name_index[nm]]
                r_lo = self.state_lo[k, out_idx]
                r_hi = self.state_hi[k, out_idx]
                corners = self._corners(a_lo, a_hi, r_lo, r_hi)
                if len(corners) == 1:
                    coef, lower = corners[0]
                    const += self._emit_endpoint(row, k, out_idx, coef, lower)
                else:
                    clo = min(c * r for c, _ in corners for r in (r_lo, r_hi))
                    chi = max(c * r for c, _ in corners for r in (r_lo, r_hi))
                    c_aux = m.add_var(f"c_{nid}_{s}_{nm}", clo, chi)
                    for coef, lower in corners:
                        # c_aux <= coef * y: move the input terms left
                        sub = {c_aux: 1.0}
                        cst = self._emit_endpoint(sub, k, out_idx, -coef, lower)
                        m.add_le(sub, -cst)
                    row[c_aux] = row.get(c_aux, 0.0) + 1.0
        if self.p.big_M != "auto":
            M = self.p.big_M
        elif self.objective == "max_robustness":
            M = min(max(0.0, self._rho_cap - lam_min) + 1.0, 2.0 * self.global_M + 1.0)
        else:
            M = min(max(0.0, _SAFETY_MARGIN - lam_min) + 1.0, 2.0 * self.global_M + 1.0)
        terms = list(row.items())
        # lambda + M (1 - z) >= threshold, written as lambda - M z >= thr - M
        row[z] = row.get(z, 0.0) - M
        threshold = _SAFETY_MARGIN
        if self.rho_var is not None:
            row[self.rho_var] = -1.0
            threshold = 0.0
        name = f"pred_{nid}_{s}"
        m.add_ge(row, threshold - const - M, name=name)
        self.audit_rows.append(
            {
                "name": name,
                "z": z,
                "M": M,
                "terms": terms,
                "const": const - threshold,
            }
        )

    @staticmethod
    def _corners(a_lo, a_hi, r_lo, r_hi):
        """Non-dominated corners of min over {a_lo, a_hi} x {y_lo, y_hi}.

        Returns (coefficient, use-lower-endpoint) pairs; a single pair means
        the corner is decided by the reachable sign and can be inlined.
        """
        if a_lo >= 0.0:
            # nonnegative coefficient: the lower signal endpoint wins
            if r_lo >= 0.0:
                return [(a_lo, True)]
            if r_hi <= 0.0:
                return [(a_hi, True)]
            return [(a_lo, True), (a_hi, True)]
        if a_hi <= 0.0:
            # nonpositive coefficient: the upper signal endpoint wins
            if r_lo >= 0.0:
                return [(a_lo, False)]
            if r_hi <= 0.0:
                return [(a_hi, False)]
            return [(a_lo, False), (a_hi, False)]
        return [(a_lo, False), (a_hi, True)]


def encode(problem: SynthesisProblem, objective="min_input", fixed_inputs=None, anchor=None) -> EncodeResult:
    """Build the MILP for one synthesis step.

    objective "min_input": minimize |u(t)| subject to lower robustness >= 0
    at every anchor. objective "max_robustness": maximize the robustness
    threshold at one anchor (default t), usually with fixed_inputs given.
    """
    if objective not in ("min_input", "max_robustness"):
        raise ValueError(f"unknown objective {objective!r}")
    if not is_pnf(problem.canonical):
        raise NotPnf("canonical spec is not in positive normal form")
    return _Encoder(problem, objective, anchor, fixed_inputs).build()


# --------------------------------------------------------------------------
# receding-horizon loop
# --------------------------------------------------------------------------


class RecedingHorizonResult:
    """Closed-loop run record: states, inputs, robustness, per-step log."""

    __slots__ = ("states", "inputs", "robustness", "log")

    def __init__(self, states, inputs, robustness, log):
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "robustness", robustness)
        object.__setattr__(self, "log", log)

    def __setattr__(self, name, value):
        raise AttributeError("RecedingHorizonResult is immutable")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        mcols = self.inputs.shape[1]
        ucols = [f"u{i}" for i in range(mcols)] if mcols > 1 else ["u"]
        w.writerow(["t", *ucols, "rho_lo", "solve_time", "nodes"])
        for row in self.log:
            w.writerow(
                [
                    row["t"],
                    *(repr(float(v)) for v in row["u"]),
                    repr(float(row["rho_lo"])),
                    f"{row['solve_time']:.6f}",
                    row["nodes"],
                ]
            )
        return buf.getvalue()


def receding_horizon(
    sys: LinearSystem,
    spec: Formula,
    x0,
    T_total: int,
    seed: int = 0,
    N: int = 16,
    b: int = 1,
    big_M="auto",
    until: str = "paper",
    step_budget: float | None = None,
    emit_dir=None,
) -> RecedingHorizonResult:
    """Closed loop: encode, solve, apply the first input, step, repeat.

    The recorded robustness interval at each step comes from re-running the
    monitoring semantics on history plus the committed plan's embedding
    rollout, so the log is independent of the MILP's own bookkeeping.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (sys.n,):
        raise ConstructionError(f"x0 must be a length-{sys.n} vector")
    out_idx = list(sys.output_indices)
    hist_lo = [x[out_idx].copy()]
    hist_hi = [x[out_idx].copy()]
    state_rows = [x.copy()]
    inputs = []
    rho_lo = []
    rho_hi = []
    log = []

    for t in range(T_total):
        history = IntervalTrace(sys.output_names, np.array(hist_lo), np.array(hist_hi))
        problem = SynthesisProblem(
            sys, spec, t, history, EmbeddingState.degenerate(x), N=N, b=b, big_M=big_M, until=until
        )
        enc = encode(problem, objective="min_input")
        if emit_dir is not None:
            with open(f"{emit_dir}/step_{t:04d}.lp", "w", encoding="utf-8") as fh:
                fh.write(emit_lp(enc.model))
        t_solve = time.monotonic()
        res = solve(enc.model, budget=step_budget)
        t_solve = time.monotonic() - t_solve
        if res.status == "infeasible":
            window = (min(enc.anchor_list), max(enc.anchor_list))
            detail = (
                f"; anchors folded infeasible: {enc.infeasible_anchors}"
                if enc.infeasible_anchors
                else ""
            )
            raise StepInfeasible(
                t, window=window, message=f"no feasible plan at step {t}{detail}"
            )
        if res.status == "timed_out":
            raise TimedOut(f"step {t} exceeded the solver budget ({step_budget} s)")
        if res.status != "optimal":
            raise StepInfeasible(t, window=None, message=f"solver returned {res.status}")
        plan = enc.extract_inputs(res.x)
        r = rho(spec, problem.predicted_trace(plan), t, until=until)
        u_t = plan[0]
        inputs.append(u_t.copy())
        rho_lo.append(r.lo)
        rho_hi.append(r.hi)
        log.append(
            {
                "t": t,
                "u": u_t.tolist(),
                "rho_lo": r.lo,
                "rho_hi": r.hi,
                "solve_time": t_solve,
                "nodes": res.nodes,
                "objective": res.objective,
            }
        )
        w = rng.uniform(sys.w_lo, sys.w_hi)
        x = sys.A @ x + sys.B @ u_t + w
        state_rows.append(x.copy())
        hist_lo.append(x[out_idx].copy())
        hist_hi.append(x[out_idx].copy())

    states = Trace(
        tuple(f"x{i + 1}" for i in range(sys.n)),
        np.array(state_rows),
    )
    return RecedingHorizonResult(
        states=states,
        inputs=np.array(inputs).reshape(T_total, sys.m),
        robustness=RobustnessTrace(np.array(rho_lo), np.array(rho_hi)),
        log=log,
    )
