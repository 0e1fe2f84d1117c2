"""Interval embedding dynamics for disturbed discrete-time linear systems.

For x(t+1) = A x(t) + B u(t) + w(t) with w(t) in a box [w_lo, w_hi] and
nonnegative A, the box [x_lo, x_hi] propagates componentwise:

    x_lo' = A x_lo + B u + w_lo
    x_hi' = A x_hi + B u + w_hi

This decoupled form is exact for nonnegative A (each next-state bound is a
monotone function of the current bounds), so the constructor rejects A with
negative entries rather than silently produce unsound boxes.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConstructionError, FormatError, InputOutOfBounds
from .traces import IntervalTrace, Trace

_INPUT_TOL = 1e-9


def _vec(v, n, what):
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (n,):
        raise ConstructionError(f"{what} must be a length-{n} vector, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ConstructionError(f"{what} contains NaN")
    return arr


class LinearSystem:
    """x(t+1) = A x(t) + B u(t) + w(t), with input and disturbance boxes."""

    __slots__ = ("A", "B", "w_lo", "w_hi", "u_lo", "u_hi", "output_vars", "dt")

    def __init__(self, A, B, w_lo, w_hi, u_lo, u_hi, output_vars, dt=None):
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConstructionError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if B.ndim != 2 or B.shape[0] != n:
            raise ConstructionError(f"B must be {n}xm, got shape {B.shape}")
        if np.isnan(A).any() or np.isnan(B).any():
            raise ConstructionError("A/B contain NaN")
        if (A < 0).any():
            raise ConstructionError(
                "A has negative entries; the decoupled lower/upper bound propagation "
                "is only exact for nonnegative A, and general decompositions are not "
                "supported"
            )
        m = B.shape[1]
        w_lo = _vec(w_lo, n, "w_lo")
        w_hi = _vec(w_hi, n, "w_hi")
        u_lo = _vec(u_lo, m, "u_lo")
        u_hi = _vec(u_hi, m, "u_hi")
        if (w_lo > w_hi).any():
            raise ConstructionError("disturbance box is empty (w_lo > w_hi)")
        if (u_lo > u_hi).any():
            raise ConstructionError("input box is empty (u_lo > u_hi)")
        output_vars = tuple((str(name), int(idx)) for name, idx in output_vars)
        if not output_vars:
            raise ConstructionError("output_vars must name at least one state")
        names = [nm for nm, _ in output_vars]
        if len(set(names)) != len(names):
            raise ConstructionError(f"duplicate output names: {names}")
        for nm, idx in output_vars:
            if not (0 <= idx < n):
                raise ConstructionError(f"output {nm!r} maps to state {idx}, out of range")
        for arr in (A, B, w_lo, w_hi, u_lo, u_hi):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "w_lo", w_lo)
        object.__setattr__(self, "w_hi", w_hi)
        object.__setattr__(self, "u_lo", u_lo)
        object.__setattr__(self, "u_hi", u_hi)
        object.__setattr__(self, "output_vars", output_vars)
        object.__setattr__(self, "dt", None if dt is None else float(dt))

    def __setattr__(self, name, value):
        raise AttributeError("LinearSystem is immutable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def output_names(self):
        return tuple(nm for nm, _ in self.output_vars)

    @property
    def output_indices(self):
        return tuple(idx for _, idx in self.output_vars)

    def __repr__(self):
        return f"LinearSystem(n={self.n}, m={self.m}, outputs={list(self.output_names)})"

    def check_input(self, u):
        u = _vec(u, self.m, "input")
        if (u < self.u_lo - _INPUT_TOL).any() or (u > self.u_hi + _INPUT_TOL).any():
            raise InputOutOfBounds(
                f"input {u.tolist()} outside [{self.u_lo.tolist()}, {self.u_hi.tolist()}]"
            )
        return u

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "A": [[float(v) for v in row] for row in self.A],
            "B": [[float(v) for v in row] for row in self.B],
            "w_lo": [float(v) for v in self.w_lo],
            "w_hi": [float(v) for v in self.w_hi],
            "u_lo": [float(v) for v in self.u_lo],
            "u_hi": [float(v) for v in self.u_hi],
            "output_vars": {nm: idx for nm, idx in self.output_vars},
        }
        if self.dt is not None:
            doc["dt"] = self.dt
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "LinearSystem":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"bad JSON: {e}") from None
        if not isinstance(doc, dict):
            raise FormatError("system JSON must be an object")
        required = ("A", "B", "w_lo", "w_hi", "u_lo", "u_hi", "output_vars")
        missing = [k for k in required if k not in doc]
        if missing:
            raise FormatError(f"system JSON missing fields: {missing}")
        ov = doc["output_vars"]
        if not isinstance(ov, dict):
            raise FormatError("output_vars must map names to state indices")
        try:
            return cls(
                doc["A"],
                doc["B"],
                doc["w_lo"],
                doc["w_hi"],
                doc["u_lo"],
                doc["u_hi"],
                tuple(ov.items()),
                dt=doc.get("dt"),
            )
        except ConstructionError as e:
            raise FormatError(str(e)) from None

    @classmethod
    def from_file(cls, path) -> "LinearSystem":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def double_integrator(dt=0.25, w=0.001, u_max=1.0) -> LinearSystem:
    """Position/velocity chain with position output y, the stock example."""
    return LinearSystem(
        A=[[1.0, dt], [0.0, 1.0]],
        B=[[0.0], [dt]],
        w_lo=[-w, -w],
        w_hi=[w, w],
        u_lo=[-u_max],
        u_hi=[u_max],
        output_vars=(("y", 0),),
        dt=dt,
    )


class EmbeddingState:
    """Componentwise state box [x_lo, x_hi]."""

    __slots__ = ("x_lo", "x_hi")

    def __init__(self, x_lo, x_hi):
        x_lo = np.asarray(x_lo, dtype=np.float64).copy()
        x_hi = np.asarray(x_hi, dtype=np.float64).copy()
        if x_lo.ndim != 1 or x_lo.shape != x_hi.shape:
            raise ConstructionError("x_lo/x_hi must be equal-length vectors")
        if np.isnan(x_lo).any() or np.isnan(x_hi).any():
            raise ConstructionError("state box contains NaN")
        if (x_lo > x_hi).any():
            raise ConstructionError("state box is empty (x_lo > x_hi)")
        x_lo.setflags(write=False)
        x_hi.setflags(write=False)
        object.__setattr__(self, "x_lo", x_lo)
        object.__setattr__(self, "x_hi", x_hi)

    def __setattr__(self, name, value):
        raise AttributeError("EmbeddingState is immutable")

    @classmethod
    def degenerate(cls, x) -> "EmbeddingState":
        return cls(x, x)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingState):
            return NotImplemented
        return np.array_equal(self.x_lo, other.x_lo) and np.array_equal(self.x_hi, other.x_hi)

    def __repr__(self):
        return f"EmbeddingState(x_lo={self.x_lo.tolist()}, x_hi={self.x_hi.tolist()})"


def step_embedding(sys: LinearSystem, s: EmbeddingState, u) -> EmbeddingState:
    """One step of the bound dynamics under a concrete input."""
    u = sys.check_input(u)
    bu = sys.B @ u
    return EmbeddingState(
        sys.A @ s.x_lo + bu + sys.w_lo,
        sys.A @ s.x_hi + bu + sys.w_hi,
    )


def simulate_embedding(sys: LinearSystem, s0: EmbeddingState, u_seq) -> IntervalTrace:
    """Roll the bound dynamics over an input sequence; T = len(u_seq) + 1.

    The trace holds the output variables only.
    """
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=np.float64))
    if u_seq.size == 0:
        u_seq = u_seq.reshape(0, sys.m)
    if u_seq.shape[1] != sys.m:
        raise ConstructionError(f"inputs must be rows of length {sys.m}")
    idx = list(sys.output_indices)
    los = [s0.x_lo[idx]]
    his = [s0.x_hi[idx]]
    s = s0
    for u in u_seq:
        s = step_embedding(sys, s, u)
        los.append(s.x_lo[idx])
        his.append(s.x_hi[idx])
    return IntervalTrace(sys.output_names, np.array(los), np.array(his))


def sample_trajectory(sys: LinearSystem, x0, u_seq, rng) -> Trace:
    """Roll the exact dynamics with disturbances drawn uniformly from the box."""
    x = _vec(x0, sys.n, "x0")
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=np.float64))
    if u_seq.size == 0:
        u_seq = u_seq.reshape(0, sys.m)
    if u_seq.shape[1] != sys.m:
        raise ConstructionError(f"inputs must be rows of length {sys.m}")
    idx = list(sys.output_indices)
    rows = [x[idx]]
    for u in u_seq:
        w = rng.uniform(sys.w_lo, sys.w_hi)
        x = sys.A @ x + sys.B @ u + w
        rows.append(x[idx])
    return Trace(sys.output_names, np.array(rows))


def input_box_reach(sys: LinearSystem, s0: EmbeddingState, steps: int):
    """Reachable state boxes when the input ranges over the whole input box.

    Returns (lo, hi), each (steps + 1, n). Used to size big-M constants: no
    trajectory the optimizer can choose leaves these boxes.
    """
    bu_lo = np.minimum(sys.B * sys.u_lo, sys.B * sys.u_hi).sum(axis=1)
    bu_hi = np.maximum(sys.B * sys.u_lo, sys.B * sys.u_hi).sum(axis=1)
    lo = np.empty((steps + 1, sys.n))
    hi = np.empty((steps + 1, sys.n))
    lo[0] = s0.x_lo
    hi[0] = s0.x_hi
    for k in range(steps):
        lo[k + 1] = sys.A @ lo[k] + bu_lo + sys.w_lo
        hi[k + 1] = sys.A @ hi[k] + bu_hi + sys.w_hi
    return lo, hi
