"""Robustness semantics: recursion vs reference, verdicts, and the window engine."""

import numpy as np
import pytest

from _oracles import (
    oracle_rho,
    oracle_rho_point,
    random_formula,
    random_interval_trace,
    random_monotone_formula,
    random_point_trace,
)
from istl.errors import TraceTooShort
from istl.expr import Var
from istl.formula import Always, Eventually, Pred, Until, horizon, parse, realize, to_pnf
from istl.intervals import Interval
from istl.semantics import (
    UNTIL_CONVENTIONS,
    Verdict,
    monitor,
    monitor_point,
    rho,
    rho_point,
    verdict,
    verdict_of,
    verdict_point,
)
from istl.traces import IntervalTrace, Trace

NAMES = ("x", "y")


def test_verdict_of_boundaries():
    assert verdict_of(Interval(0.0, 1.0)) is Verdict.TRUE
    assert verdict_of(Interval(0.0, 0.0)) is Verdict.TRUE  # zero counts as True
    assert verdict_of(Interval(-1.0, -1e-300)) is Verdict.FALSE
    assert verdict_of(Interval(-1.0, 0.0)) is Verdict.UNDEF
    assert verdict_of(Interval(-0.5, 0.5)) is Verdict.UNDEF


def test_rho_matches_reference_recursion():
    rng = np.random.default_rng(1001)
    for _ in range(250):
        f = random_formula(rng, NAMES, int(rng.integers(0, 5)), nonlinear=True)
        h = horizon(f)
        T = h + 1 + int(rng.integers(0, 4))
        tr = random_interval_trace(rng, NAMES, T)
        t = int(rng.integers(0, T - h))
        until = UNTIL_CONVENTIONS[int(rng.integers(0, 2))]
        got = rho(f, tr, t, until=until)
        want = oracle_rho(f, tr, t, until=until)
        assert got.lo == want[0] and got.hi == want[1]


def test_rho_point_matches_reference_recursion():
    rng = np.random.default_rng(1002)
    for _ in range(250):
        f = random_formula(rng, NAMES, int(rng.integers(0, 5)), nonlinear=True)
        f = realize(f, rng)
        h = horizon(f)
        T = h + 1 + int(rng.integers(0, 4))
        tr = random_point_trace(rng, NAMES, T)
        t = int(rng.integers(0, T - h))
        until = UNTIL_CONVENTIONS[int(rng.integers(0, 2))]
        assert rho_point(f, tr, t, until=until) == oracle_rho_point(f, tr, t, until=until)


def test_soundness_of_interval_robustness():
    # any realization of the trace and the predicate intervals lands inside
    # the interval robustness, and verdicts imply the sign of the sample
    rng = np.random.default_rng(1003)
    for _ in range(150):
        f = random_formula(rng, NAMES, int(rng.integers(1, 4)))
        h = horizon(f)
        T = h + 1 + int(rng.integers(0, 3))
        tr = random_interval_trace(rng, NAMES, T)
        until = UNTIL_CONVENTIONS[int(rng.integers(0, 2))]
        r = rho(f, tr, 0, until=until)
        v = verdict(f, tr, until=until)
        for _ in range(10):
            fk = realize(f, rng)
            xk = tr.sample(rng)
            s = rho_point(fk, xk, 0, until=until)
            assert r.lo <= s <= r.hi
            if v is Verdict.TRUE:
                assert s >= 0.0
            if v is Verdict.FALSE:
                assert s < 0.0


def test_until_conventions_differ():
    left = Pred(Var("x"))
    right = Pred(Var("y"))
    f = Until(left, right, 1, 2)
    tr = Trace(("x", "y"), np.array([[5.0, 2.0], [-1.0, 4.0], [3.0, 0.0]]))
    assert rho_point(f, tr, 0, until="paper") == 0.0
    assert rho_point(f, tr, 0, until="classical") == -1.0
    with pytest.raises(ValueError):
        rho_point(f, tr, 0, until="nonsense")


def test_until_degenerate_window_equals_both_conventions_at_zero():
    # with t1 = t2 = 0 both conventions reduce to min(left, right) at t
    left = Pred(Var("x"))
    right = Pred(Var("y"))
    f = Until(left, right, 0, 0)
    tr = Trace(("x", "y"), np.array([[0.7, -0.2]]))
    assert rho_point(f, tr, 0, until="paper") == -0.2
    assert rho_point(f, tr, 0, until="classical") == -0.2


def test_monotone_specs_have_minimal_intervals():
    # negation-free monotone predicates: the interval robustness is exactly
    # the robustness at the two corner traces
    rng = np.random.default_rng(1004)
    for _ in range(80):
        f = random_monotone_formula(rng, NAMES, int(rng.integers(0, 4)))
        h = horizon(f)
        T = h + 1 + int(rng.integers(0, 3))
        tr = random_interval_trace(rng, NAMES, T)
        r = rho(f, tr, 0)
        lo_corner = rho_point(f, Trace(tr.names, tr.lo.copy()), 0)
        hi_corner = rho_point(f, Trace(tr.names, tr.hi.copy()), 0)
        assert abs(r.lo - lo_corner) <= 1e-12
        assert abs(r.hi - hi_corner) <= 1e-12


def test_pnf_preserves_robustness():
    rng = np.random.default_rng(1005)
    for _ in range(120):
        f = random_formula(rng, NAMES, int(rng.integers(1, 4)))
        g = to_pnf(f)
        h = horizon(f)
        assert horizon(g) == h
        T = h + 2
        tr = random_interval_trace(rng, NAMES, T)
        until = UNTIL_CONVENTIONS[int(rng.integers(0, 2))]
        a = rho(f, tr, 0, until=until)
        b = rho(g, tr, 0, until=until)
        assert abs(a.lo - b.lo) <= 1e-12 and abs(a.hi - b.hi) <= 1e-12


def test_trace_too_short():
    f = parse("G[0,5] x >= 0")
    tr = Trace(("x",), np.zeros((4, 1)))
    with pytest.raises(TraceTooShort) as exc:
        rho_point(f, tr, 0)
    assert exc.value.needed == 6 and exc.value.got == 4
    with pytest.raises(TraceTooShort):
        rho_point(f, Trace(("x",), np.zeros((7, 1))), 2)
    with pytest.raises(TraceTooShort):
        monitor_point(f, tr)
    with pytest.raises(ValueError):
        rho_point(f, Trace(("x",), np.zeros((7, 1))), -1)


def test_monitor_equals_recursion_bitwise():
    rng = np.random.default_rng(1006)
    for _ in range(60):
        f = random_formula(rng, NAMES, int(rng.integers(0, 5)), nonlinear=True)
        h = horizon(f)
        T = h + 1 + int(rng.integers(0, 20))
        tr = random_interval_trace(rng, NAMES, T)
        until = UNTIL_CONVENTIONS[int(rng.integers(0, 2))]
        rt = monitor(f, tr, until=until)
        assert len(rt) == T - h
        for t in range(len(rt)):
            r = rho(f, tr, t, until=until)
            assert rt.rho_lo[t] == r.lo and rt.rho_hi[t] == r.hi


def test_monitor_point_equals_recursion_bitwise():
    rng = np.random.default_rng(1007)
    for _ in range(60):
        f = realize(random_formula(rng, NAMES, int(rng.integers(0, 5))), rng)
        h = horizon(f)
        T = h + 1 + int(rng.integers(0, 20))
        tr = random_point_trace(rng, NAMES, T)
        until = UNTIL_CONVENTIONS[int(rng.integers(0, 2))]
        rt = monitor_point(f, tr, until=until)
        assert len(rt) == T - h
        for t in range(len(rt)):
            v = rho_point(f, tr, t, until=until)
            assert rt.rho_lo[t] == v == rt.rho_hi[t]


def test_monitor_window_edges():
    # window length 1 and windows touching the trace end
    f = parse("G[0,0] x >= 0")
    tr = Trace(("x",), np.array([[1.0], [-2.0], [3.0]]))
    rt = monitor_point(f, tr)
    assert np.array_equal(rt.rho_lo, [1.0, -2.0, 3.0])
    g = parse("F[2,2] x >= 0")
    rt2 = monitor_point(g, tr)
    assert np.array_equal(rt2.rho_lo, [3.0])


def test_verdict_helpers():
    f = parse("x >= 0")
    tr_true = IntervalTrace(("x",), np.array([[0.5]]), np.array([[1.0]]))
    tr_false = IntervalTrace(("x",), np.array([[-1.0]]), np.array([[-0.5]]))
    tr_undef = IntervalTrace(("x",), np.array([[-0.5]]), np.array([[0.5]]))
    assert verdict(f, tr_true) is Verdict.TRUE
    assert verdict(f, tr_false) is Verdict.FALSE
    assert verdict(f, tr_undef) is Verdict.UNDEF
    assert verdict_point(f, Trace(("x",), np.array([[0.0]])))
    assert not verdict_point(f, Trace(("x",), np.array([[-1e-9]])))


def test_robustness_trace_csv():
    rt = monitor_point(parse("x >= 0"), Trace(("x",), np.array([[1.5], [-0.25]])))
    lines = rt.to_csv().splitlines()
    assert lines[0] == "t,rho_lo,rho_hi,verdict"
    assert lines[1] == "0,1.5,1.5,True"
    assert lines[2] == "1,-0.25,-0.25,False"
    assert rt.verdicts() == (Verdict.TRUE, Verdict.FALSE)
    assert rt.interval(0) == Interval(1.5, 1.5)


def test_nested_untils_and_long_windows():
    # stress shapes the random generator rarely hits
    rng = np.random.default_rng(1008)
    inner = Until(Pred(Var("x")), Pred(Var("y")), 0, 6)
    f = Until(inner, Eventually(Pred(Var("x")), 2, 5), 1, 7)
    h = horizon(f)
    T = h + 4
    tr = random_interval_trace(rng, NAMES, T)
    for until in UNTIL_CONVENTIONS:
        rt = monitor(f, tr, until=until)
        for t in range(len(rt)):
            want = oracle_rho(f, tr, t, until=until)
            assert rt.rho_lo[t] == want[0] and rt.rho_hi[t] == want[1]
