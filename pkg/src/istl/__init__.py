"""Interval signal temporal logic: monitoring and control synthesis.

The package evaluates STL specifications whose predicates carry interval
uncertainty over traces whose samples carry interval uncertainty, producing
a sound interval of robustness values and a three-valued verdict. On top of
that sit an interval embedding of disturbed linear systems and a big-M MILP
encoding used for receding-horizon input synthesis, solved by a small exact
branch-and-bound solver.
"""

from .errors import (
    BadBigM,
    ConstructionError,
    DomainError,
    EmptyArgument,
    FormatError,
    HorizonMismatch,
    IndeterminateForm,
    InputOutOfBounds,
    IstlError,
    MalformedBound,
    NegativeRadius,
    NonAffinePredicate,
    NondegenerateConstant,
    NotPnf,
    NumericalFailure,
    ParseError,
    StepInfeasible,
    TimedOut,
    TraceTooShort,
    UnboundVariable,
    UnknownVariable,
    UnsupportedNegation,
)
from .intervals import (
    Interval,
    IntervalVector,
    abs_inc,
    make,
    max_inc,
    min_inc,
    mul,
    scale,
    sqrt_inc,
    square,
)
from .expr import (
    Abs,
    Add,
    Const,
    Dot,
    Expr,
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
    negate_expr,
    parse,
    parse_spec,
    realize,
    to_pnf,
    unparse,
)
from .traces import IntervalTrace, Trace, parse_trace_text, read_trace, write_trace
from .semantics import (
    UNTIL_CONVENTIONS,
    RobustnessTrace,
    Verdict,
    monitor,
    monitor_point,
    rho,
    rho_point,
    verdict,
    verdict_of,
    verdict_point,
)
from .embedding import (
    EmbeddingState,
    LinearSystem,
    double_integrator,
    input_box_reach,
    sample_trajectory,
    simulate_embedding,
    step_embedding,
)
from .milp import MilpModel, SolveResult, emit_lp, solve
from .synthesis import (
    EncodeResult,
    RecedingHorizonResult,
    SynthesisProblem,
    as_affine,
    canonicalize,
    encode,
    receding_horizon,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
