"""Exception types shared across the toolkit."""


class IstlError(Exception):
    """Base class for all istl errors."""


class ConstructionError(IstlError):
    """Invalid interval or container construction (NaN endpoint, lo > hi, bad shape)."""


class IndeterminateForm(IstlError):
    """An interval product hit the 0 * inf corner."""


class EmptyArgument(IstlError):
    """An n-ary operation received zero arguments."""


class UnboundVariable(IstlError):
    """An expression references a variable missing from the binding."""


class NondegenerateConstant(IstlError):
    """Point evaluation reached an interval constant with nonzero width."""


class DomainError(IstlError):
    """Operand outside the domain of a primitive (sqrt of a clearly negative interval)."""


class ParseError(IstlError):
    """Specification text rejected; carries a 1-based line/column."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class UnknownVariable(ParseError):
    """Formula uses an identifier not in the declared variable list."""


class MalformedBound(ParseError):
    """Temporal bound is not a pair of integers with 0 <= t1 <= t2."""


class UnsupportedNegation(IstlError):
    """Negation normal form cannot push a negation through Until."""


class FormatError(IstlError):
    """Trace file violates the CSV/JSON schema."""


class NegativeRadius(IstlError):
    """widen() received a negative radius."""


class TraceTooShort(IstlError):
    """Trace does not cover the formula horizon at the requested time."""

    def __init__(self, needed, got):
        self.needed = needed
        self.got = got
        super().__init__(f"trace has {got} samples but {needed} are required")


class InputOutOfBounds(IstlError):
    """Control input outside the declared input box."""


class NotPnf(IstlError):
    """Synthesis requires a formula in positive normal form."""


class NonAffinePredicate(IstlError):
    """Synthesis requires every predicate to be affine in the output variables."""


class HorizonMismatch(IstlError):
    """Synthesis window configuration (N, b, horizon) is contradictory."""


class BadBigM(IstlError):
    """big-M constant is nonpositive or could not be derived."""


class NumericalFailure(IstlError):
    """LP solve lost feasibility/optimality beyond recoverable tolerances."""


class TimedOut(IstlError):
    """Solve budget exhausted."""


class StepInfeasible(IstlError):
    """A receding-horizon step has no input satisfying the constraint window."""

    def __init__(self, t, window=None, message=None):
        self.t = t
        self.window = window
        msg = message or f"synthesis step t={t} infeasible"
        if window is not None:
            msg += f" (constraint window {window[0]}..{window[1]})"
        super().__init__(msg)
