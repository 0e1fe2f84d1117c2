"""Temporal formula trees, the specification grammar, and normal forms.

Grammar (discrete time, integer step bounds)::

    spec      := [ "vars" ident ("," ident)* ";" ] formula
    formula   := conj ( "|" conj )*
    conj      := temporal ( "&" temporal )*
    temporal  := "G" bound temporal | "F" bound temporal
               | atom [ "U" bound temporal ]
    atom      := "!" atom | "(" formula ")" | pred
    pred      := expr (">=" | "<=") expr
    bound     := "[" integer "," integer "]"
    expr      := term  (("+" | "-") term)*
    term      := factor ("*" factor)*
    factor    := "-" factor | primary
    primary   := number | "[" number "," number "]" | ident
               | "min(" expr ("," expr)* ")" | "max(" expr ("," expr)* ")"
               | "abs(" expr ")" | "sqr(" expr ")" | "sqrt(" expr ")"
               | "(" expr ")"

Comparisons normalize to nonnegativity predicates: ``lhs >= rhs`` becomes
Pred(lhs - rhs) and ``lhs <= rhs`` becomes Pred(rhs - lhs); a literal zero on
the closed side is dropped rather than wrapped in a subtraction, so printed
formulas round-trip structurally. `&`/`|` chains flatten into n-ary And/Or.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MalformedBound, ParseError, UnknownVariable, UnsupportedNegation
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
    sample_realization,
    variables,
)
from .intervals import Interval, IntervalVector


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Pred(Formula):
    """Atomic predicate expr >= 0; the optional name is metadata only."""

    expr: Expr
    name: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


def _check_args(args):
    if len(args) < 2:
        raise ValueError("And/Or need at least two children")
    return tuple(args)


@dataclass(frozen=True)
class And(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", _check_args(self.args))


@dataclass(frozen=True)
class Or(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", _check_args(self.args))


def _check_bound(t1, t2):
    if not (isinstance(t1, int) and isinstance(t2, int)):
        raise MalformedBound(f"temporal bounds must be integers, got [{t1}, {t2}]")
    if t1 < 0 or t2 < t1:
        raise MalformedBound(f"temporal bounds must satisfy 0 <= t1 <= t2, got [{t1}, {t2}]")


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula
    t1: int
    t2: int

    def __post_init__(self):
        _check_bound(self.t1, self.t2)


@dataclass(frozen=True)
class Always(Formula):
    child: Formula
    t1: int
    t2: int

    def __post_init__(self):
        _check_bound(self.t1, self.t2)


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula
    t1: int
    t2: int

    def __post_init__(self):
        _check_bound(self.t1, self.t2)


def horizon(f: Formula) -> int:
    """Number of future steps the formula inspects beyond the evaluation time."""
    if isinstance(f, Pred):
        return 0
    if isinstance(f, Not):
        return horizon(f.child)
    if isinstance(f, (And, Or)):
        return max(horizon(a) for a in f.args)
    if isinstance(f, (Always, Eventually)):
        return f.t2 + horizon(f.child)
    if isinstance(f, Until):
        return f.t2 + max(horizon(f.left), horizon(f.right))
    raise TypeError(f"not a formula node: {f!r}")


def formula_variables(f: Formula) -> tuple:
    """Variable names used by the formula's predicates, first occurrence order."""
    seen = []

    def walk(g):
        if isinstance(g, Pred):
            for nm in variables(g.expr):
                if nm not in seen:
                    seen.append(nm)
        elif isinstance(g, Not):
            walk(g.child)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                walk(a)
        elif isinstance(g, Until):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, (Always, Eventually)):
            walk(g.child)

    walk(f)
    return tuple(seen)


def realize(f: Formula, rng) -> Formula:
    """Sample one point realization of every interval predicate constant.

    Traversal is preorder, so a fixed generator state gives a fixed result.
    """
    if isinstance(f, Pred):
        return Pred(sample_realization(f.expr, rng), name=f.name)
    if isinstance(f, Not):
        return Not(realize(f.child, rng))
    if isinstance(f, And):
        return And(tuple(realize(a, rng) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(realize(a, rng) for a in f.args))
    if isinstance(f, Until):
        return Until(realize(f.left, rng), realize(f.right, rng), f.t1, f.t2)
    if isinstance(f, Always):
        return Always(realize(f.child, rng), f.t1, f.t2)
    if isinstance(f, Eventually):
        return Eventually(realize(f.child, rng), f.t1, f.t2)
    raise TypeError(f"not a formula node: {f!r}")


def negate_expr(e: Expr) -> Expr:
    """Expression for -e, keeping affine Dot predicates in Dot form."""
    if isinstance(e, Dot):
        coeffs = IntervalVector(-e.coeffs.hi, -e.coeffs.lo)
        return Dot(coeffs, e.names, -e.offset)
    if isinstance(e, Neg):
        return e.a
    return Neg(e)


def to_pnf(f: Formula) -> Formula:
    """Positive normal form: negations pushed into predicates.

    Negating Until is not supported (no dual operator in this fragment).
    """

    def pos(g):
        if isinstance(g, Pred):
            return g
        if isinstance(g, Not):
            return neg(g.child)
        if isinstance(g, And):
            return And(tuple(pos(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(pos(a) for a in g.args))
        if isinstance(g, Until):
            return Until(pos(g.left), pos(g.right), g.t1, g.t2)
        if isinstance(g, Always):
            return Always(pos(g.child), g.t1, g.t2)
        if isinstance(g, Eventually):
            return Eventually(pos(g.child), g.t1, g.t2)
        raise TypeError(f"not a formula node: {g!r}")

    def neg(g):
        if isinstance(g, Pred):
            return Pred(negate_expr(g.expr), name=g.name)
        if isinstance(g, Not):
            return pos(g.child)
        if isinstance(g, And):
            return Or(tuple(neg(a) for a in g.args))
        if isinstance(g, Or):
            return And(tuple(neg(a) for a in g.args))
        if isinstance(g, Always):
            return Eventually(neg(g.child), g.t1, g.t2)
        if isinstance(g, Eventually):
            return Always(neg(g.child), g.t1, g.t2)
        if isinstance(g, Until):
            raise UnsupportedNegation("cannot push negation through Until")
        raise TypeError(f"not a formula node: {g!r}")

    return pos(f)


def is_pnf(f: Formula) -> bool:
    if isinstance(f, Pred):
        return True
    if isinstance(f, Not):
        return False
    if isinstance(f, (And, Or)):
        return all(is_pnf(a) for a in f.args)
    if isinstance(f, Until):
        return is_pnf(f.left) and is_pnf(f.right)
    if isinstance(f, (Always, Eventually)):
        return is_pnf(f.child)
    raise TypeError(f"not a formula node: {f!r}")


# --------------------------------------------------------------------------
# tokenizer
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|<=|[!&|+\-*()\[\],;])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"vars", "G", "F", "U", "min", "max", "abs", "sqr", "sqrt", "inf"}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


def _tokenize(text):
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        start = m.start()
        col = start - line_start + 1
        if m.lastgroup == "number":
            tokens.append(_Token("number", m.group(), line, col))
        elif m.lastgroup == "ident":
            tokens.append(_Token("ident", m.group(), line, col))
        elif m.lastgroup == "op":
            tokens.append(_Token(m.group(), m.group(), line, col))
        # whitespace/comment: track line numbers
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = start + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, n - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, declared=None):
        self.toks = tokens
        self.i = 0
        self.declared = declared  # None means any identifier is a variable

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind, what=None):
        t = self.peek()
        if t.kind != kind:
            raise ParseError(
                f"expected {what or kind}, found {t.text or 'end of input'!r}", t.line, t.col
            )
        return self.next()

    def error(self, msg):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # -- formula levels ----------------------------------------------------

    def formula(self):
        parts = [self.conj()]
        while self.peek().kind == "|":
            self.next()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.temporal()]
        while self.peek().kind == "&":
            self.next()
            parts.append(self.temporal())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def temporal(self):
        t = self.peek()
        if t.kind == "ident" and t.text in ("G", "F") and self.peek(1).kind == "[":
            self.next()
            t1, t2 = self.bound()
            child = self.temporal()
            return Always(child, t1, t2) if t.text == "G" else Eventually(child, t1, t2)
        left = self.atom()
        t = self.peek()
        if t.kind == "ident" and t.text == "U":
            self.next()
            t1, t2 = self.bound()
            right = self.temporal()
            return Until(left, right, t1, t2)
        return left

    def atom(self):
        t = self.peek()
        if t.kind == "!":
            self.next()
            return Not(self.atom())
        if t.kind == "(":
            # '(' may open a parenthesized formula or a parenthesized
            # sub-expression of a predicate; try the formula reading first.
            mark = self.i
            try:
                self.next()
                f = self.formula()
                self.expect(")")
                return f
            except ParseError:
                self.i = mark
                return self.pred()
        return self.pred()

    def pred(self):
        lhs = self.expr()
        t = self.peek()
        if t.kind == ">=":
            self.next()
            rhs = self.expr()
            body = lhs if _is_zero(rhs) else Sub(lhs, rhs)
            return Pred(body)
        if t.kind == "<=":
            self.next()
            rhs = self.expr()
            body = rhs if _is_zero(lhs) else Sub(rhs, lhs)
            return Pred(body)
        self.error("expected '>=' or '<=' in predicate")

    def bound(self):
        open_tok = self.expect("[", "'[' starting a temporal bound")
        t1 = self._bound_int()
        self.expect(",", "',' in temporal bound")
        t2 = self._bound_int()
        self.expect("]", "']' closing a temporal bound")
        if t1 < 0 or t2 < t1:
            raise MalformedBound(
                f"temporal bounds must satisfy 0 <= t1 <= t2, got [{t1}, {t2}]",
                open_tok.line,
                open_tok.col,
            )
        return t1, t2

    def _bound_int(self):
        t = self.peek()
        negative = False
        if t.kind == "-":
            negative = True
            self.next()
            t = self.peek()
        if t.kind != "number" or any(c in t.text for c in ".eE"):
            raise MalformedBound(
                f"temporal bound must be an integer, found {t.text!r}", t.line, t.col
            )
        self.next()
        v = int(t.text)
        return -v if negative else v

    # -- expression levels ---------------------------------------------------

    def expr(self):
        e = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek().kind == "*":
            self.next()
            e = Mul(e, self.factor())
        return e

    def factor(self):
        t = self.peek()
        if t.kind == "-":
            self.next()
            nxt = self.peek()
            if nxt.kind == "number":
                self.next()
                return Const.point(-float(nxt.text))
            return Neg(self.factor())
        return self.primary()

    def primary(self):
        t = self.peek()
        if t.kind == "number":
            self.next()
            return Const.point(float(t.text))
        if t.kind == "[":
            self.next()
            lo = self._signed_number()
            self.expect(",", "',' in interval literal")
            hi = self._signed_number()
            self.expect("]", "']' closing interval literal")
            return Const(Interval(lo, hi))
        if t.kind == "(":
            self.next()
            e = self.expr()
            self.expect(")", "')' closing a sub-expression")
            return e
        if t.kind == "ident":
            name = t.text
            if name in ("min", "max"):
                self.next()
                args = self._expr_list()
                return Min(args) if name == "min" else Max(args)
            if name == "abs":
                self.next()
                return Abs(self._one_arg())
            if name == "sqr":
                self.next()
                return Square(self._one_arg())
            if name == "sqrt":
                self.next()
                return Sqrt(self._one_arg())
            if name in _KEYWORDS:
                self.error(f"keyword {name!r} cannot be used as a variable")
            if self.declared is not None and name not in self.declared:
                raise UnknownVariable(f"unknown variable {name!r}", t.line, t.col)
            self.next()
            return Var(name)
        self.error(f"expected an expression, found {t.text or 'end of input'!r}")

    def _signed_number(self):
        t = self.peek()
        sign = 1.0
        if t.kind == "-":
            sign = -1.0
            self.next()
            t = self.peek()
        if t.kind == "number":
            self.next()
            return sign * float(t.text)
        if t.kind == "ident" and t.text == "inf":
            self.next()
            return sign * float("inf")
        self.error("expected a number")

    def _one_arg(self):
        self.expect("(", "'('")
        e = self.expr()
        self.expect(")", "')'")
        return e

    def _expr_list(self):
        self.expect("(", "'('")
        args = [self.expr()]
        while self.peek().kind == ",":
            self.next()
            args.append(self.expr())
        self.expect(")", "')'")
        return tuple(args)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value.lo == 0.0 and e.value.hi == 0.0


def parse_spec(text: str, vars: tuple | list | None = None):
    """Parse specification text; returns (declared_vars_or_None, formula).

    A leading ``vars a, b; ...`` declaration fixes the variable universe. If
    both a declaration and the `vars` argument are present they must agree.
    """
    tokens = _tokenize(text)
    declared = None
    i = 0
    if tokens and tokens[0].kind == "ident" and tokens[0].text == "vars":
        i = 1
        names = []
        while True:
            t = tokens[i]
            if t.kind != "ident":
                raise ParseError("expected a variable name in vars declaration", t.line, t.col)
            if t.text in _KEYWORDS:
                raise ParseError(f"keyword {t.text!r} cannot be declared as a variable", t.line, t.col)
            if t.text in names:
                raise ParseError(f"duplicate variable {t.text!r} in vars declaration", t.line, t.col)
            names.append(t.text)
            i += 1
            if tokens[i].kind == ",":
                i += 1
                continue
            break
        t = tokens[i]
        if t.kind != ";":
            raise ParseError("expected ';' after vars declaration", t.line, t.col)
        i += 1
        declared = tuple(names)
    if vars is not None:
        vars = tuple(vars)
        if declared is not None and declared != vars:
            raise ParseError(
                f"declared variables {declared} conflict with supplied variables {vars}"
            )
        declared = declared or vars
    p = _Parser(tokens, declared=set(declared) if declared is not None else None)
    p.i = i
    f = p.formula()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return declared, f


def parse(text: str, vars: tuple | list | None = None) -> Formula:
    """Parse a formula (with optional vars header); see parse_spec."""
    return parse_spec(text, vars)[1]


# --------------------------------------------------------------------------
# pretty printer
# --------------------------------------------------------------------------

_F_OR, _F_AND, _F_TEMP, _F_ATOM = 0, 1, 2, 3
_E_ADD, _E_MUL, _E_UNARY, _E_PRIM = 0, 1, 2, 3


def _num(v: float) -> str:
    return repr(float(v))


def _unparse_expr(e: Expr):
    """Returns (text, precedence level)."""
    if isinstance(e, Var):
        return e.name, _E_PRIM
    if isinstance(e, Const):
        if e.value.is_degenerate():
            v = e.value.lo
            if v < 0.0 or (v == 0.0 and str(v)[0] == "-"):
                return f"-{_num(-v)}", _E_UNARY
            return _num(v), _E_PRIM
        return f"[{_num(e.value.lo)}, {_num(e.value.hi)}]", _E_PRIM
    if isinstance(e, Add):
        return f"{_expr_at(e.a, _E_ADD)} + {_expr_at(e.b, _E_MUL)}", _E_ADD
    if isinstance(e, Sub):
        return f"{_expr_at(e.a, _E_ADD)} - {_expr_at(e.b, _E_MUL)}", _E_ADD
    if isinstance(e, Neg):
        inner = e.a
        if isinstance(inner, Const):
            return f"-({_expr_at(inner, _E_PRIM)})", _E_UNARY
        return f"-{_expr_at(inner, _E_UNARY)}", _E_UNARY
    if isinstance(e, Mul):
        return f"{_expr_at(e.a, _E_MUL)}*{_expr_at(e.b, _E_UNARY)}", _E_MUL
    if isinstance(e, Min):
        return "min(" + ", ".join(_expr_at(a, _E_ADD) for a in e.args) + ")", _E_PRIM
    if isinstance(e, Max):
        return "max(" + ", ".join(_expr_at(a, _E_ADD) for a in e.args) + ")", _E_PRIM
    if isinstance(e, Abs):
        return f"abs({_expr_at(e.a, _E_ADD)})", _E_PRIM
    if isinstance(e, Square):
        return f"sqr({_expr_at(e.a, _E_ADD)})", _E_PRIM
    if isinstance(e, Sqrt):
        return f"sqrt({_expr_at(e.a, _E_ADD)})", _E_PRIM
    if isinstance(e, Dot):
        # reparses as an Add/Mul chain: semantically equal, structurally flat
        parts = []
        for j, nm in enumerate(e.names):
            c = e.coeffs[j]
            if c.is_degenerate():
                parts.append(f"{_num(c.lo)}*{nm}")
            else:
                parts.append(f"[{_num(c.lo)}, {_num(c.hi)}]*{nm}")
        if e.offset.lo != 0.0 or e.offset.hi != 0.0 or not parts:
            if e.offset.is_degenerate():
                parts.append(_num(e.offset.lo))
            else:
                parts.append(f"[{_num(e.offset.lo)}, {_num(e.offset.hi)}]")
        return " + ".join(parts), _E_ADD if len(parts) > 1 else _E_MUL
    raise TypeError(f"not an expression node: {e!r}")


def _expr_at(e: Expr, minlevel: int) -> str:
    text, level = _unparse_expr(e)
    if level < minlevel:
        return f"({text})"
    return text


def _unparse_formula(f: Formula):
    if isinstance(f, Pred):
        return f"{_expr_at(f.expr, _E_ADD)} >= 0", _F_ATOM
    if isinstance(f, Not):
        child_text = _unparse_formula(f.child)[0]
        if isinstance(f.child, Not):
            return f"!{child_text}", _F_ATOM
        return f"!({child_text})", _F_ATOM
    if isinstance(f, And):
        return " & ".join(_formula_at(a, _F_TEMP) for a in f.args), _F_AND
    if isinstance(f, Or):
        return " | ".join(_formula_at(a, _F_AND) for a in f.args), _F_OR
    if isinstance(f, Always):
        return f"G[{f.t1},{f.t2}] {_formula_at(f.child, _F_TEMP)}", _F_TEMP
    if isinstance(f, Eventually):
        return f"F[{f.t1},{f.t2}] {_formula_at(f.child, _F_TEMP)}", _F_TEMP
    if isinstance(f, Until):
        return (
            f"{_formula_at(f.left, _F_ATOM)} U[{f.t1},{f.t2}] {_formula_at(f.right, _F_TEMP)}",
            _F_TEMP,
        )
    raise TypeError(f"not a formula node: {f!r}")


def _formula_at(f: Formula, minlevel: int) -> str:
    text, level = _unparse_formula(f)
    if level < minlevel:
        return f"({text})"
    return text


def unparse(f: Formula, vars: tuple | None = None) -> str:
    """Render a formula back to grammar text; parse(unparse(f)) == f."""
    body = _unparse_formula(f)[0]
    if vars is not None:
        return "vars " + ", ".join(vars) + ";\n" + body
    return body
