"""Discrete-time signal traces: point-valued and interval-valued.

File formats:

* point CSV      header ``t,<name>,...``; one row per step, t dense from 0
* interval CSV   header ``t,<name>:lo,<name>:hi,...``
* point JSON     ``{"vars": [...], "samples": [[...], ...]}``
* interval JSON  same shape with ``[lo, hi]`` pairs as entries

Floats are written with repr, so a save/load round trip is bit exact.
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

from .errors import ConstructionError, FormatError, NegativeRadius, UnknownVariable
from .intervals import IntervalVector


def _as_matrix(values, what):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ConstructionError(f"{what} must be a (T, n) array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ConstructionError(f"{what} must have at least one row and one column")
    if np.isnan(arr).any():
        raise ConstructionError(f"{what} contains NaN")
    return arr


def _check_names(names, width):
    names = tuple(str(n) for n in names)
    if len(names) != width:
        raise ConstructionError(f"{len(names)} names for {width} columns")
    if len(set(names)) != len(names):
        raise ConstructionError(f"duplicate variable names: {names}")
    return names


class Trace:
    """Point-valued trace: one float per variable per step."""

    __slots__ = ("names", "values")

    def __init__(self, names, values):
        values = _as_matrix(values, "trace values")
        names = _check_names(names, values.shape[1])
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("Trace is immutable")

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Trace(vars={list(self.names)}, T={len(self)})"

    @property
    def binding(self):
        return {n: j for j, n in enumerate(self.names)}

    def point(self, t):
        return np.asarray(self.values[t])

    def column(self, name):
        try:
            j = self.names.index(name)
        except ValueError:
            raise UnknownVariable(f"unknown variable {name!r}") from None
        return np.asarray(self.values[:, j])

    # -- conversions -------------------------------------------------------

    def to_interval(self) -> "IntervalTrace":
        """Degenerate interval trace: lo == hi == values."""
        return IntervalTrace(self.names, self.values, self.values)

    def widen(self, radii) -> "IntervalTrace":
        """Inflate each sample to a box: value +/- radius per variable.

        `radii` is a scalar (applied to all variables) or a name -> radius map.
        """
        if np.isscalar(radii):
            rad = np.full(len(self.names), float(radii))
        else:
            for name in radii:
                if name not in self.names:
                    raise UnknownVariable(f"unknown variable {name!r} in radii")
            rad = np.array([float(radii.get(n, 0.0)) for n in self.names])
        if np.isnan(rad).any():
            raise NegativeRadius("radius must be a number, got NaN")
        if (rad < 0).any():
            bad = [n for n, r in zip(self.names, rad) if r < 0]
            raise NegativeRadius(f"negative radius for {bad}")
        return IntervalTrace(self.names, self.values - rad, self.values + rad)

    # -- serialization -------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.names])
        for t in range(len(self)):
            w.writerow([t, *(repr(float(v)) for v in self.values[t])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        header, rows = _read_csv(text)
        if header[:1] != ["t"] or len(header) < 2:
            raise FormatError(f"point trace header must be 't,<name>,...', got {header}")
        names = header[1:]
        if any(":" in n for n in names):
            raise FormatError("found ':lo'/':hi' columns; this is an interval trace")
        values = _parse_rows(rows, len(names))
        return cls(names, values)

    def to_json(self) -> str:
        doc = {
            "vars": list(self.names),
            "samples": [[float(v) for v in row] for row in self.values],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        doc = _load_json(text)
        names, samples = _json_fields(doc)
        try:
            values = np.array(samples, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise FormatError(f"bad samples array: {e}") from None
        if values.ndim != 2:
            raise FormatError("samples must be a list of equal-length rows of numbers")
        if values.shape[1] != len(names):
            raise FormatError(f"{values.shape[1]} columns for {len(names)} vars")
        return cls(names, values)


class IntervalTrace:
    """Interval-valued trace: a box [lo, hi] per variable per step."""

    __slots__ = ("names", "lo", "hi")

    def __init__(self, names, lo, hi):
        lo = _as_matrix(lo, "trace lower bounds")
        hi = _as_matrix(hi, "trace upper bounds")
        if lo.shape != hi.shape:
            raise ConstructionError(f"shape mismatch: lo {lo.shape} vs hi {hi.shape}")
        if (lo > hi).any():
            t, j = np.argwhere(lo > hi)[0]
            raise ConstructionError(
                f"empty interval at t={t} var {j}: [{lo[t, j]}, {hi[t, j]}]"
            )
        names = _check_names(names, lo.shape[1])
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalTrace is immutable")

    def __len__(self):
        return self.lo.shape[0]

    def __eq__(self, other):
        if not isinstance(other, IntervalTrace):
            return NotImplemented
        return (
            self.names == other.names
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self):
        return f"IntervalTrace(vars={list(self.names)}, T={len(self)})"

    @property
    def binding(self):
        return {n: j for j, n in enumerate(self.names)}

    def box(self, t) -> IntervalVector:
        return IntervalVector(self.lo[t], self.hi[t])

    def contains(self, trace: Trace) -> bool:
        """True when the point trace lies inside this trace, step by step."""
        if trace.names != self.names or len(trace) != len(self):
            return False
        return bool((self.lo <= trace.values).all() and (trace.values <= self.hi).all())

    def is_degenerate(self) -> bool:
        return bool((self.lo == self.hi).all())

    def midpoint(self) -> Trace:
        return Trace(self.names, 0.5 * (self.lo + self.hi))

    def sample(self, rng) -> Trace:
        """Uniform random point trace inside the box."""
        return Trace(self.names, rng.uniform(self.lo, self.hi))

    # -- serialization -------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t"]
        for n in self.names:
            header += [f"{n}:lo", f"{n}:hi"]
        w.writerow(header)
        for t in range(len(self)):
            row = [t]
            for j in range(len(self.names)):
                row += [repr(float(self.lo[t, j])), repr(float(self.hi[t, j]))]
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "IntervalTrace":
        header, rows = _read_csv(text)
        if header[:1] != ["t"] or len(header) < 3 or (len(header) - 1) % 2 != 0:
            raise FormatError(
                f"interval trace header must be 't,<name>:lo,<name>:hi,...', got {header}"
            )
        names = []
        for k in range(1, len(header), 2):
            a, b = header[k], header[k + 1]
            if not a.endswith(":lo") or not b.endswith(":hi") or a[:-3] != b[:-3]:
                raise FormatError(f"bad column pair {a!r}, {b!r}; expected <name>:lo,<name>:hi")
            names.append(a[:-3])
        flat = _parse_rows(rows, 2 * len(names))
        return cls(names, flat[:, 0::2], flat[:, 1::2])

    def to_json(self) -> str:
        doc = {
            "vars": list(self.names),
            "samples": [
                [[float(self.lo[t, j]), float(self.hi[t, j])] for j in range(len(self.names))]
                for t in range(len(self))
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "IntervalTrace":
        doc = _load_json(text)
        names, samples = _json_fields(doc)
        try:
            arr = np.array(samples, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise FormatError(f"bad samples array: {e}") from None
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise FormatError("interval samples must be rows of [lo, hi] pairs")
        if arr.shape[1] != len(names):
            raise FormatError(f"{arr.shape[1]} columns for {len(names)} vars")
        return cls(names, arr[:, :, 0], arr[:, :, 1])


# --------------------------------------------------------------------------
# shared parsing helpers
# --------------------------------------------------------------------------


def _read_csv(text):
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows:
        raise FormatError("empty trace file")
    return [c.strip() for c in rows[0]], rows[1:]


def _parse_rows(rows, width):
    if not rows:
        raise FormatError("trace has a header but no samples")
    out = np.empty((len(rows), width))
    for t, row in enumerate(rows):
        if len(row) != width + 1:
            raise FormatError(f"row {t}: expected {width + 1} fields, got {len(row)}")
        try:
            tick = float(row[0])
            vals = [float(c) for c in row[1:]]
        except ValueError as e:
            raise FormatError(f"row {t}: {e}") from None
        if tick != t:
            raise FormatError(f"row {t}: time column must count 0,1,2,... but reads {row[0]}")
        out[t] = vals
    if np.isnan(out).any():
        raise FormatError("trace contains NaN")
    return out


def _load_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"bad JSON: {e}") from None


def _json_fields(doc):
    if not isinstance(doc, dict) or "vars" not in doc or "samples" not in doc:
        raise FormatError("trace JSON must be an object with 'vars' and 'samples'")
    names = doc["vars"]
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise FormatError("'vars' must be a list of names")
    if not isinstance(doc["samples"], list) or not doc["samples"]:
        raise FormatError("'samples' must be a non-empty list")
    return names, doc["samples"]


# --------------------------------------------------------------------------
# path-level loaders (format picked by extension, kind sniffed from content)
# --------------------------------------------------------------------------


def parse_trace_text(text):
    """Parse trace text, sniffing JSON vs CSV and point vs interval."""
    if text.lstrip().startswith("{"):
        doc = _load_json(text)
        names, samples = _json_fields(doc)
        first = samples[0]
        if first and isinstance(first[0], list):
            return IntervalTrace.from_json(text)
        return Trace.from_json(text)
    header = _read_csv(text)[0]
    if any(c.endswith(":lo") or c.endswith(":hi") for c in header[1:]):
        return IntervalTrace.from_csv(text)
    return Trace.from_csv(text)


def read_trace(path):
    """Load a Trace or IntervalTrace from a .csv or .json file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    ext = os.path.splitext(path)[1].lower()
    looks_json = text.lstrip().startswith("{")
    if ext == ".json" and not looks_json:
        raise FormatError("expected JSON content in a .json trace file")
    if ext == ".csv" and looks_json:
        raise FormatError("expected CSV content in a .csv trace file")
    if ext not in (".csv", ".json"):
        raise FormatError(f"unsupported trace extension {ext!r} (use .csv or .json)")
    return parse_trace_text(text)


def write_trace(path, trace):
    """Save a Trace or IntervalTrace to a .csv or .json file."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        payload = trace.to_csv()
    elif ext == ".json":
        payload = trace.to_json()
    else:
        raise FormatError(f"unsupported trace extension {ext!r} (use .csv or .json)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)
