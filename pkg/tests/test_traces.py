"""Point/interval traces: construction, widening, and serialization."""

import json

import numpy as np
import pytest

from istl.errors import FormatError, NegativeRadius, UnknownVariable
from istl.intervals import IntervalVector
from istl.traces import (
    IntervalTrace,
    Trace,
    parse_trace_text,
    read_trace,
    write_trace,
)


def _point(T=5, names=("a", "b")):
    rng = np.random.default_rng(42)
    return Trace(names, rng.uniform(-1, 1, (T, len(names))))


def test_trace_basics():
    tr = _point()
    assert len(tr) == 5
    assert tr.binding == {"a": 0, "b": 1}
    assert np.array_equal(tr.point(2), tr.values[2])
    assert np.array_equal(tr.column("b"), tr.values[:, 1])
    with pytest.raises(UnknownVariable):
        tr.column("zz")


def test_to_interval_is_degenerate():
    tr = _point()
    itr = tr.to_interval()
    assert itr.is_degenerate()
    assert np.array_equal(itr.lo, tr.values)
    assert np.array_equal(itr.hi, tr.values)
    assert np.array_equal(itr.midpoint().values, tr.values)


def test_widen_scalar_and_map():
    tr = _point()
    w = tr.widen(0.1)
    assert np.allclose(w.hi - w.lo, 0.2)
    assert w.contains(tr)
    w2 = tr.widen({"a": 0.5})
    assert np.allclose(w2.hi[:, 0] - w2.lo[:, 0], 1.0)
    assert np.allclose(w2.hi[:, 1] - w2.lo[:, 1], 0.0)
    with pytest.raises(NegativeRadius):
        tr.widen(-0.1)
    with pytest.raises(NegativeRadius):
        tr.widen({"a": float("nan")})
    with pytest.raises(UnknownVariable):
        tr.widen({"q": 0.1})


def test_interval_trace_box_and_sampling():
    tr = _point()
    itr = tr.widen(0.25)
    box = itr.box(3)
    assert isinstance(box, IntervalVector)
    assert np.array_equal(box.lo, itr.lo[3])
    rng = np.random.default_rng(6)
    for _ in range(10):
        s = itr.sample(rng)
        assert itr.contains(s)
    assert itr.contains(itr.midpoint())
    assert not itr.contains(Trace(tr.names, tr.values + 1.0))


def test_point_csv_roundtrip_exact():
    tr = _point()
    text = tr.to_csv()
    assert text.splitlines()[0] == "t,a,b"
    back = Trace.from_csv(text)
    assert back.names == tr.names
    assert np.array_equal(back.values, tr.values)  # repr round-trips floats


def test_point_json_roundtrip_exact():
    tr = _point()
    blob = tr.to_json()
    data = json.loads(blob)
    assert data["vars"] == list(tr.names)
    back = Trace.from_json(blob)
    assert np.array_equal(back.values, tr.values)


def test_interval_csv_roundtrip_exact():
    itr = _point().widen({"a": 0.1, "b": 0.0})
    text = itr.to_csv()
    assert text.splitlines()[0] == "t,a:lo,a:hi,b:lo,b:hi"
    back = IntervalTrace.from_csv(text)
    assert np.array_equal(back.lo, itr.lo) and np.array_equal(back.hi, itr.hi)


def test_interval_json_roundtrip_exact():
    itr = _point().widen(0.3)
    back = IntervalTrace.from_json(itr.to_json())
    assert back.names == itr.names
    assert np.array_equal(back.lo, itr.lo) and np.array_equal(back.hi, itr.hi)


def test_time_index_must_be_dense():
    with pytest.raises(FormatError):
        Trace.from_csv("t,a\n0,1.0\n2,2.0\n")
    with pytest.raises(FormatError):
        Trace.from_csv("t,a\n1,1.0\n2,2.0\n")
    with pytest.raises(FormatError):
        IntervalTrace.from_csv("t,a:lo,a:hi\n0,0.0,1.0\n0,0.0,1.0\n")


def test_interval_bounds_must_be_ordered():
    from istl.errors import ConstructionError

    with pytest.raises(ConstructionError):
        IntervalTrace.from_csv("t,a:lo,a:hi\n0,1.0,0.0\n")


def test_parse_trace_text_sniffs_format():
    tr = _point()
    assert isinstance(parse_trace_text(tr.to_csv()), Trace)
    assert isinstance(parse_trace_text(tr.widen(0.1).to_csv()), IntervalTrace)
    assert isinstance(parse_trace_text(tr.to_json()), Trace)
    assert isinstance(parse_trace_text(tr.widen(0.1).to_json()), IntervalTrace)
    with pytest.raises(FormatError):
        parse_trace_text("definitely not a trace")


def test_read_write_trace_files(tmp_path):
    tr = _point()
    itr = tr.widen(0.2)
    p1 = tmp_path / "p.csv"
    p2 = tmp_path / "i.json"
    write_trace(str(p1), tr)
    write_trace(str(p2), itr)
    back1 = read_trace(str(p1))
    back2 = read_trace(str(p2))
    assert isinstance(back1, Trace) and np.array_equal(back1.values, tr.values)
    assert isinstance(back2, IntervalTrace) and np.array_equal(back2.lo, itr.lo)


def test_read_trace_extension_checks(tmp_path):
    tr = _point()
    bad = tmp_path / "p.txt"
    bad.write_text(tr.to_csv())
    with pytest.raises(FormatError):
        read_trace(str(bad))
    mismatched = tmp_path / "p.json"
    mismatched.write_text(tr.to_csv())
    with pytest.raises(FormatError):
        read_trace(str(mismatched))


def test_shape_validation():
    with pytest.raises(Exception):
        Trace(("a", "b"), np.zeros((4, 3)))
    with pytest.raises(Exception):
        IntervalTrace(("a",), np.zeros((4, 1)), np.zeros((5, 1)))
    with pytest.raises(Exception):
        IntervalTrace(("a",), np.ones((4, 1)), np.zeros((4, 1)))
