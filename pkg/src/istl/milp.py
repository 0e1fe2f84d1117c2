"""Small exact MILP solver: bounded-variable simplex plus branch and bound.

The model layer stores variables (continuous or binary, with bounds), linear
rows (<=, >=, ==), and a linear minimize objective, all in deterministic
creation order. `solve` runs best-first branch and bound on the binaries,
with every relaxation solved by a dense two-phase revised simplex that
handles general variable bounds directly (no splitting into differences).

Determinism: Dantzig pricing with lowest-index tie break, switching to
Bland's rule outright after 500 consecutive degenerate pivots; branching
picks the lowest-index fractional binary, and the down branch (fix to 0) is
explored first among equal bounds.
"""

from __future__ import annotations

import heapq
import math
import re
import time
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

INF = math.inf

_FEAS_TOL = 1e-9
_OPT_TOL = 1e-9
_INT_TOL = 1e-6
_BLAND_AFTER = 500
_REFACTOR_EVERY = 150


class MilpModel:
    """Linear model: bounded variables, binaries, <=/>=/== rows, min objective."""

    def __init__(self, name="model"):
        self.name = str(name)
        self.var_names = []
        self.lb = []
        self.ub = []
        self.binaries = []  # sorted indices of binary variables
        self._binary_set = set()
        self.rows = []  # (coeffs dict, sense, rhs, name)
        self.obj = {}
        self.obj_const = 0.0

    # -- variables -----------------------------------------------------------

    def add_var(self, name, lo=-INF, hi=INF):
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ValueError(f"bad bounds [{lo}, {hi}] for {name!r}")
        self.var_names.append(str(name))
        self.lb.append(lo)
        self.ub.append(hi)
        return len(self.var_names) - 1

    def add_binary(self, name):
        j = self.add_var(name, 0.0, 1.0)
        self.binaries.append(j)
        self._binary_set.add(j)
        return j

    def fix(self, j, value):
        """Pin a variable to a constant (tightens both bounds)."""
        self._check_index(j)
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"cannot fix {self.var_names[j]!r} to {value}")
        self.lb[j] = value
        self.ub[j] = value

    def _check_index(self, j):
        if not (0 <= j < len(self.var_names)):
            raise ValueError(f"variable index {j} out of range")

    @property
    def n_vars(self):
        return len(self.var_names)

    @property
    def n_binaries(self):
        return len(self.binaries)

    # -- rows / objective ------------------------------------------------------

    def _row(self, coeffs, sense, rhs, name):
        clean = {}
        for j, a in coeffs.items():
            self._check_index(j)
            a = float(a)
            if math.isnan(a) or math.isinf(a):
                raise ValueError(f"non-finite coefficient for {self.var_names[j]!r}")
            if a != 0.0:
                clean[int(j)] = a
        rhs = float(rhs)
        if math.isnan(rhs):
            raise ValueError("NaN right-hand side")
        self.rows.append((clean, sense, rhs, name or f"c{len(self.rows)}"))

    def add_le(self, coeffs, rhs, name=None):
        self._row(coeffs, "<=", rhs, name)

    def add_ge(self, coeffs, rhs, name=None):
        self._row(coeffs, ">=", rhs, name)

    def add_eq(self, coeffs, rhs, name=None):
        self._row(coeffs, "==", rhs, name)

    def set_objective(self, coeffs, constant=0.0):
        clean = {}
        for j, a in coeffs.items():
            self._check_index(j)
            a = float(a)
            if a != 0.0:
                clean[int(j)] = a
        self.obj = clean
        self.obj_const = float(constant)

    def __repr__(self):
        return (
            f"MilpModel({self.name!r}, vars={self.n_vars}, "
            f"binaries={self.n_binaries}, rows={len(self.rows)})"
        )


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded | timed_out
    x: np.ndarray | None = None
    objective: float | None = None
    nodes: int = 0
    iterations: int = 0
    wall: float = 0.0
    gap_bound: float | None = None  # best proven lower bound when timed out

    def value(self, j):
        return float(self.x[j])

    def __repr__(self):
        obj = None if self.objective is None else round(self.objective, 9)
        return (
            f"SolveResult({self.status}, objective={obj}, nodes={self.nodes}, "
            f"iterations={self.iterations})"
        )


# --------------------------------------------------------------------------
# bounded-variable two-phase simplex
# --------------------------------------------------------------------------

_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3


class _Simplex:
    """min c'x s.t. Ax = b, l <= x <= u  (dense, explicit basis inverse).

    `slack_row[j - n_struct]` names the row owned by slack column j; the start
    basis crashes each row onto its slack when that is feasible, so artificial
    columns (and phase 1 work) only cover equality rows and violated slacks.
    """

    def __init__(self, A, b, c, l, u, slack_row=None):
        self.m, n = A.shape
        m = self.m
        self.A = np.hstack([A, np.zeros((m, m))])
        self.b = b.astype(np.float64)
        self.l = np.concatenate([l, np.zeros(m)])
        self.u = np.concatenate([u, np.full(m, INF)])
        self.n = n
        self.nt = n + m
        self.c = np.concatenate([c, np.zeros(m)])
        self.slack_row = {} if slack_row is None else slack_row
        self.iterations = 0

    def solve(self, max_iter=None):
        m, n = self.m, self.n
        if max_iter is None:
            max_iter = 2000 + 40 * (m + n)
        # nonbasic start: every structural variable at a finite bound (0 if free)
        self.status = np.empty(self.nt, dtype=np.int8)
        self.x = np.zeros(self.nt)
        for j in range(n):
            if self.l[j] > -INF:
                self.status[j] = _AT_LO
                self.x[j] = self.l[j]
            elif self.u[j] < INF:
                self.status[j] = _AT_HI
                self.x[j] = self.u[j]
            else:
                self.status[j] = _FREE
                self.x[j] = 0.0
        r = self.b - self.A[:, :n] @ self.x[:n]
        self.basis = np.empty(m, dtype=int)
        self.status[n:] = _AT_LO
        self.u[n:] = 0.0  # artificials exist only while hosting their row
        sign = np.ones(m)
        need_phase1 = False
        row_slack = {i: j for j, i in self.slack_row.items()}
        for i in range(m):
            j = row_slack.get(i)
            # slack column is +/-1 at row i; its start value is sign * r
            if j is not None and self.A[i, j] * r[i] >= 0.0:
                self.basis[i] = j
                self.status[j] = _BASIC
                self.x[j] = self.A[i, j] * r[i]
                sign[i] = self.A[i, j]
            else:
                a = n + i
                sign[i] = 1.0 if r[i] >= 0.0 else -1.0
                self.A[i, a] = sign[i]
                self.u[a] = INF
                self.basis[i] = a
                self.status[a] = _BASIC
                self.x[a] = abs(r[i])
                need_phase1 = need_phase1 or abs(r[i]) > _FEAS_TOL
        self.Binv = np.diag(1.0 / sign)

        if need_phase1:
            # phase 1: minimize the artificial sum
            cost = np.zeros(self.nt)
            cost[n:] = 1.0
            st = self._iterate(cost, max_iter, phase=1)
            if st == "iterlimit":
                raise NumericalFailure("simplex iteration limit in phase 1")
            if self.x[n:].sum() > 1e-7:
                return "infeasible"
        # pin artificials at zero for phase 2 (basic ones may stay, at value 0)
        self.u[n:] = 0.0
        self.x[n:] = np.where(self.status[n:] == _BASIC, self.x[n:], 0.0)
        self.status[n:] = np.where(self.status[n:] == _BASIC, _BASIC, _AT_LO)
        st = self._iterate(self.c, max_iter, phase=2)
        if st == "iterlimit":
            raise NumericalFailure("simplex iteration limit in phase 2 (cycling?)")
        return st

    def objective(self):
        return float(self.c[: self.n] @ self.x[: self.n])

    def solution(self):
        return self.x[: self.n].copy()

    def _refactor(self):
        Bcols = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(Bcols)
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis during refactorization") from None
        if not np.isfinite(self.Binv).all():
            raise NumericalFailure("non-finite basis inverse")
        nonbasic_val = self.x.copy()
        nonbasic_val[self.basis] = 0.0
        rhs = self.b - self.A @ nonbasic_val
        self.x[self.basis] = self.Binv @ rhs

    def _iterate(self, cost, max_iter, phase):
        degenerate_streak = 0
        bland = False
        since_refactor = 0
        while True:
            self.iterations += 1
            if self.iterations > max_iter:
                return "iterlimit"
            y = cost[self.basis] @ self.Binv
            z = cost - y @ self.A
            viol = np.zeros(self.nt)
            at_lo = self.status == _AT_LO
            at_hi = self.status == _AT_HI
            free = self.status == _FREE
            viol[at_lo] = np.minimum(z[at_lo], 0.0)
            viol[at_hi] = -np.maximum(z[at_hi], 0.0)
            viol[free] = -np.abs(z[free])
            if phase == 2:
                # pinned artificials cannot re-enter
                viol[self.n :][self.status[self.n :] != _BASIC] = 0.0
            cand = np.flatnonzero(viol < -_OPT_TOL)
            if cand.size == 0:
                return "optimal"
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmin(viol[cand])])
            zj = z[j]
            if self.status[j] == _AT_LO:
                sigma = 1.0
            elif self.status[j] == _AT_HI:
                sigma = -1.0
            else:
                sigma = 1.0 if zj < 0 else -1.0

            d = self.Binv @ self.A[:, j]
            # ratio test: basic limits plus the entering variable's own span
            xb = self.x[self.basis]
            lb = self.l[self.basis]
            ub = self.u[self.basis]
            step = sigma * d
            room = np.full(self.m, INF)
            pos = step > _FEAS_TOL
            neg = step < -_FEAS_TOL
            room[pos] = (xb[pos] - lb[pos]) / step[pos]
            room[neg] = (ub[neg] - xb[neg]) / (-step[neg])
            leave = int(np.argmin(room)) if self.m else -1
            theta = room[leave] if leave >= 0 else INF
            leave_to = _AT_LO if (leave >= 0 and step[leave] > 0) else _AT_HI
            span = self.u[j] - self.l[j]
            flip = span < theta
            if flip:
                theta = span
            if theta == INF:
                return "unbounded" if phase == 2 else "iterlimit"
            theta = max(theta, 0.0)
            if theta <= _FEAS_TOL:
                degenerate_streak += 1
                if degenerate_streak >= _BLAND_AFTER:
                    bland = True
            else:
                degenerate_streak = 0

            # apply the step
            self.x[j] += sigma * theta
            self.x[self.basis] = xb - step * theta
            if flip:
                self.status[j] = _AT_HI if self.status[j] == _AT_LO else _AT_LO
                continue
            out = self.basis[leave]
            self.status[out] = leave_to
            self.x[out] = self.l[out] if leave_to == _AT_LO else self.u[out]
            self.status[j] = _BASIC
            self.basis[leave] = j
            dr = d[leave]
            if abs(dr) < 1e-11:
                raise NumericalFailure("pivot element vanished")
            self.Binv[leave, :] /= dr
            col = d.copy()
            col[leave] = 0.0
            self.Binv -= np.outer(col, self.Binv[leave, :])
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                self._refactor()
                since_refactor = 0


def _standard_form(model: MilpModel, lb, ub):
    """Rows to equalities with slack columns; returns (A, b, c, l, u, slack_row)."""
    n = model.n_vars
    n_slack = sum(1 for row in model.rows if row[1] != "==")
    m = len(model.rows)
    A = np.zeros((m, n + n_slack))
    b = np.empty(m)
    l = np.concatenate([lb, np.zeros(n_slack)])
    u = np.concatenate([ub, np.full(n_slack, INF)])
    slack_row = {}
    k = n
    for i, (coeffs, sense, rhs, _) in enumerate(model.rows):
        for j, a in coeffs.items():
            A[i, j] = a
        b[i] = rhs
        if sense == "<=":
            A[i, k] = 1.0
            slack_row[k] = i
            k += 1
        elif sense == ">=":
            A[i, k] = -1.0
            slack_row[k] = i
            k += 1
    c = np.zeros(n + n_slack)
    for j, a in model.obj.items():
        c[j] = a
    return A, b, c, l, u, slack_row


def _solve_lp(model, lb, ub):
    """(status, x, objective, iterations) for the LP with the given bounds."""
    A, b, c, l, u, slack_row = _standard_form(model, lb, ub)
    sx = _Simplex(A, b, c, l, u, slack_row)
    status = sx.solve()
    if status == "optimal":
        x = sx.solution()[: model.n_vars]
        return "optimal", x, float(sx.objective() + model.obj_const), sx.iterations
    return status, None, None, sx.iterations


def solve(model: MilpModel, budget: float | None = None, node_limit: int = 1_000_000) -> SolveResult:
    """Exact minimize; branch and bound over the binaries, best-first.

    `budget` is wall seconds; on expiry the best incumbent (if any) comes
    back with status "timed_out" and the proven lower bound in `gap_bound`.
    """
    t0 = time.monotonic()
    lb = np.array(model.lb, dtype=np.float64)
    ub = np.array(model.ub, dtype=np.float64)
    for j in model.binaries:
        if lb[j] < -_FEAS_TOL or ub[j] > 1 + _FEAS_TOL:
            raise ValueError(f"binary {model.var_names[j]!r} with non-unit bounds")
    total_iters = 0
    nodes = 0

    best_x = None
    best_obj = INF
    # heap entries: (bound, -depth, serial, lb, ub); LP solved when popped
    serial = 0
    heap = [(-INF, 0, serial, lb, ub)]
    root_status = None

    while heap:
        if budget is not None and time.monotonic() - t0 > budget:
            wall = time.monotonic() - t0
            open_bounds = [h[0] for h in heap]
            gap = min(open_bounds) if open_bounds else best_obj
            if best_x is not None:
                return SolveResult(
                    "timed_out", best_x, best_obj, nodes, total_iters, wall, gap_bound=gap
                )
            return SolveResult("timed_out", None, None, nodes, total_iters, wall, gap_bound=gap)
        if nodes >= node_limit:
            wall = time.monotonic() - t0
            open_bounds = [h[0] for h in heap]
            gap = min(open_bounds) if open_bounds else best_obj
            if best_x is not None:
                return SolveResult(
                    "timed_out", best_x, best_obj, nodes, total_iters, wall, gap_bound=gap
                )
            return SolveResult("timed_out", None, None, nodes, total_iters, wall, gap_bound=gap)
        bound, negdepth, _, nlb, nub = heapq.heappop(heap)
        if bound >= best_obj - 1e-9:
            continue
        nodes += 1
        status, x, obj, iters = _solve_lp(model, nlb, nub)
        total_iters += iters
        if nodes == 1:
            root_status = status
            if status == "unbounded":
                return SolveResult(
                    "unbounded", None, None, nodes, total_iters, time.monotonic() - t0
                )
        if status != "optimal":
            continue
        if obj >= best_obj - 1e-9:
            continue
        frac_j = -1
        for j in model.binaries:
            if abs(x[j] - round(x[j])) > _INT_TOL:
                frac_j = j
                break
        if frac_j < 0:
            # integral: round binaries exactly and accept as incumbent
            xi = x.copy()
            for j in model.binaries:
                xi[j] = round(xi[j])
            best_x, best_obj = xi, obj
            continue
        depth = -negdepth + 1
        down_ub = nub.copy()
        down_ub[frac_j] = 0.0
        serial += 1
        heapq.heappush(heap, (obj, -depth, serial, nlb, down_ub))
        up_lb = nlb.copy()
        up_lb[frac_j] = 1.0
        serial += 1
        heapq.heappush(heap, (obj, -depth, serial, up_lb, nub))

    wall = time.monotonic() - t0
    if best_x is not None:
        return SolveResult("optimal", best_x, best_obj, nodes, total_iters, wall)
    if root_status == "unbounded":
        return SolveResult("unbounded", None, None, nodes, total_iters, wall)
    return SolveResult("infeasible", None, None, nodes, total_iters, wall)


# --------------------------------------------------------------------------
# LP-format text emitter
# --------------------------------------------------------------------------


def _sanitize_names(names):
    out = []
    seen = set()
    for i, raw in enumerate(names):
        s = re.sub(r"[^A-Za-z0-9_]", "_", raw)
        if not s or s[0].isdigit():
            s = "v_" + s
        if s in seen:
            s = f"{s}_{i}"
        seen.add(s)
        out.append(s)
    return out


def _coef_text(pairs, names):
    parts = []
    for j, a in pairs:
        if not parts:
            parts.append(f"{_lpnum(a)} {names[j]}")
        elif a >= 0:
            parts.append(f"+ {_lpnum(a)} {names[j]}")
        else:
            parts.append(f"- {_lpnum(-a)} {names[j]}")
    return " ".join(parts) if parts else "0 " + (names[0] if names else "x")


def _lpnum(v):
    return repr(float(v))


def emit_lp(model: MilpModel) -> str:
    """Serialize in the conventional LP text format, deterministically."""
    names = _sanitize_names(model.var_names)
    lines = [f"\\ {model.name}"]
    if model.obj_const:
        lines.append(f"\\ objective constant {_lpnum(model.obj_const)} not representable")
    lines.append("Minimize")
    obj_pairs = sorted(model.obj.items())
    lines.append(" obj: " + _coef_text(obj_pairs, names))
    lines.append("Subject To")
    for coeffs, sense, rhs, rname in model.rows:
        op = {"<=": "<=", ">=": ">=", "==": "="}[sense]
        lines.append(f" {rname}: " + _coef_text(sorted(coeffs.items()), names) + f" {op} {_lpnum(rhs)}")
    lines.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = model.lb[j], model.ub[j]
        if j in model._binary_set and lo == 0.0 and hi == 1.0:
            continue  # implied by Binaries section
        if lo == hi:
            lines.append(f" {nm} = {_lpnum(lo)}")
        elif lo == -INF and hi == INF:
            lines.append(f" {nm} free")
        elif lo == -INF:
            lines.append(f" -inf <= {nm} <= {_lpnum(hi)}")
        elif hi == INF:
            lines.append(f" {nm} >= {_lpnum(lo)}")
        else:
            lines.append(f" {_lpnum(lo)} <= {nm} <= {_lpnum(hi)}")
    if model.binaries:
        lines.append("Binaries")
        for j in model.binaries:
            lines.append(f" {names[j]}")
    lines.append("End")
    return "\n".join(lines) + "\n"
