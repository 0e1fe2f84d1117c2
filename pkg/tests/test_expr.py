"""Expression trees: interval evaluation is a sound inclusion of point evaluation."""

import numpy as np
import pytest

from _oracles import oracle_eval, oracle_eval_point, random_nonlinear_expr
from istl.errors import DomainError, EmptyArgument, NondegenerateConstant, UnboundVariable
from istl.expr import (
    Abs,
    Add,
    Const,
    Dot,
    Max,
    Min,
    Mul,
    Neg,
    Sqrt,
    Square,
    Sub,
    Var,
    eval_interval,
    eval_interval_series,
    eval_point,
    eval_point_series,
    is_monotone_nondecreasing,
    sample_realization,
    variables,
)
from istl.intervals import Interval, IntervalVector

NAMES = ("x", "y", "z")
INDEX = {"x": 0, "y": 1, "z": 2}


def _box(rng, scale=2.0, max_width=0.5):
    mid = rng.uniform(-scale, scale, 3)
    w = rng.uniform(0.0, max_width, 3)
    return IntervalVector(mid - w / 2.0, mid + w / 2.0)


def test_point_evaluation_frozen():
    e = Add(Mul(Const.point(2.0), Var("x")), Neg(Var("y")))
    assert eval_point(e, [1.5, 0.5, 0.0], INDEX) == 2.5
    e2 = Min((Var("x"), Square(Var("y")), Abs(Var("z"))))
    assert eval_point(e2, [4.0, -3.0, -2.0], INDEX) == 2.0
    e3 = Sqrt(Add(Square(Var("x")), Square(Var("y"))))
    assert eval_point(e3, [3.0, 4.0, 0.0], INDEX) == 5.0


def test_dot_matches_explicit_affine():
    coeffs = IntervalVector([1.0, -2.0], [1.0, -2.0])
    d = Dot(coeffs, ("x", "y"), Interval(0.5, 0.5))
    x = np.array([2.0, 3.0, 9.0])
    assert eval_point(d, x, INDEX) == 1.0 * 2.0 - 2.0 * 3.0 + 0.5
    box = IntervalVector.degenerate(x)
    iv = eval_interval(d, box, INDEX)
    assert iv.lo == iv.hi == -3.5


def test_interval_evaluation_matches_reference():
    rng = np.random.default_rng(31415)
    for _ in range(400):
        e = random_nonlinear_expr(rng, NAMES, int(rng.integers(1, 4)))
        box = _box(rng)
        got = eval_interval(e, box, INDEX)
        want = oracle_eval(e, box.lo, box.hi, INDEX)
        assert got.lo == want[0] and got.hi == want[1]


def test_point_evaluation_matches_reference():
    rng = np.random.default_rng(27182)
    for _ in range(400):
        e = random_nonlinear_expr(rng, NAMES, int(rng.integers(1, 4)))
        e = sample_realization(e, rng)  # make constants degenerate
        x = rng.uniform(-2.0, 2.0, 3)
        assert eval_point(e, x, INDEX) == oracle_eval_point(e, x, INDEX)


def test_interval_evaluation_is_inclusion():
    # sampled realizations of both the box and the interval constants must
    # land inside the interval value
    rng = np.random.default_rng(5150)
    for _ in range(150):
        e = random_nonlinear_expr(rng, NAMES, int(rng.integers(1, 4)))
        box = _box(rng)
        iv = eval_interval(e, box, INDEX)
        for _ in range(20):
            x = box.lo + rng.random(3) * (box.hi - box.lo)
            ek = sample_realization(e, rng)
            v = eval_point(ek, x, INDEX)
            assert iv.lo - 1e-12 <= v <= iv.hi + 1e-12


def test_series_forms_match_scalar_forms():
    rng = np.random.default_rng(404)
    T = 17
    lo = rng.uniform(-2.0, 0.0, (T, 3))
    hi = lo + rng.uniform(0.0, 0.5, (T, 3))
    for _ in range(40):
        e = random_nonlinear_expr(rng, NAMES, 2)
        slo, shi = eval_interval_series(e, lo, hi, INDEX)
        for t in range(T):
            iv = eval_interval(e, IntervalVector(lo[t], hi[t]), INDEX)
            assert iv.lo == slo[t] and iv.hi == shi[t]
        ek = sample_realization(e, rng)
        vs = eval_point_series(ek, lo, INDEX)
        for t in range(T):
            assert eval_point(ek, lo[t], INDEX) == vs[t]


def test_point_eval_rejects_interval_constants():
    with pytest.raises(NondegenerateConstant):
        eval_point(Add(Var("x"), Const(Interval(0.0, 1.0))), [0.0, 0.0, 0.0], INDEX)
    d = Dot(IntervalVector([0.9], [1.1]), ("x",), Interval(0.0, 0.0))
    with pytest.raises(NondegenerateConstant):
        eval_point(d, [0.0, 0.0, 0.0], INDEX)
    d2 = Dot(IntervalVector([1.0], [1.0]), ("x",), Interval(-0.1, 0.1))
    with pytest.raises(NondegenerateConstant):
        eval_point(d2, [0.0, 0.0, 0.0], INDEX)


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        eval_point(Var("missing"), [0.0, 0.0, 0.0], INDEX)
    with pytest.raises(UnboundVariable):
        eval_interval(Var("missing"), IntervalVector.degenerate([0.0, 0.0, 0.0]), INDEX)


def test_sqrt_domain_handling():
    with pytest.raises(DomainError):
        eval_point(Sqrt(Var("x")), [-1.0, 0.0, 0.0], INDEX)
    # tiny negative round-off below zero is clamped, not fatal
    assert eval_point(Sqrt(Var("x")), [-1e-13, 0.0, 0.0], INDEX) == 0.0
    box = IntervalVector([-1e-13, 0.0, 0.0], [4.0, 0.0, 0.0])
    iv = eval_interval(Sqrt(Var("x")), box, INDEX)
    assert iv.lo == 0.0 and iv.hi == 2.0
    with pytest.raises(DomainError):
        eval_interval(Sqrt(Var("x")), IntervalVector([-0.5, 0, 0], [4.0, 0, 0]), INDEX)


def test_min_max_need_arguments():
    with pytest.raises(EmptyArgument):
        Min(())
    with pytest.raises(EmptyArgument):
        Max(())


def test_variables_preorder():
    e = Add(Mul(Var("b"), Var("a")), Min((Var("c"), Var("b"))))
    assert variables(e) == ("b", "a", "c")
    d = Dot(IntervalVector([1.0, 1.0], [1.0, 1.0]), ("q", "p"), Interval(0.0, 0.0))
    assert variables(d) == ("q", "p")


def test_sample_realization_deterministic_and_contained():
    e = Add(
        Mul(Const(Interval(0.5, 1.5)), Var("x")),
        Const(Interval(-0.25, 0.25)),
    )
    a = sample_realization(e, np.random.default_rng(11))
    b = sample_realization(e, np.random.default_rng(11))
    assert a == b
    assert a.a.a.value.is_degenerate()
    assert Interval(0.5, 1.5).contains(a.a.a.value.lo)
    assert Interval(-0.25, 0.25).contains(a.b.value.lo)
    # degenerate constants pass through unchanged
    e2 = Const.point(3.0)
    assert sample_realization(e2, np.random.default_rng(0)) == e2


def test_sample_realization_draws_dot_coefficients():
    d = Dot(IntervalVector([0.9, -1.1], [1.1, -0.9]), ("x", "y"), Interval(-0.1, 0.1))
    r = sample_realization(d, np.random.default_rng(5))
    assert isinstance(r, Dot)
    for j in range(2):
        assert r.coeffs.lo[j] == r.coeffs.hi[j]
        assert d.coeffs.lo[j] <= r.coeffs.lo[j] <= d.coeffs.hi[j]
    assert r.offset.is_degenerate()


def test_is_monotone_nondecreasing():
    x, y = Var("x"), Var("y")
    assert is_monotone_nondecreasing(Add(x, y))
    assert is_monotone_nondecreasing(Min((x, Add(y, Const.point(1.0)))))
    assert is_monotone_nondecreasing(Max((x, y)))
    assert is_monotone_nondecreasing(
        Dot(IntervalVector([1.0, 0.5], [1.0, 0.5]), ("x", "y"), Interval(0.0, 0.0))
    )
    assert not is_monotone_nondecreasing(Neg(x))
    assert not is_monotone_nondecreasing(Sub(x, y))
    assert not is_monotone_nondecreasing(Mul(x, y))
    assert not is_monotone_nondecreasing(Abs(x))
    assert not is_monotone_nondecreasing(
        Dot(IntervalVector([1.0, -0.5], [1.0, -0.5]), ("x", "y"), Interval(0.0, 0.0))
    )
