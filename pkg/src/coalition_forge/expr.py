"""Arithmetic expressions of one variable ``x``, used for provider cost curves.

Grammar (``^`` is right-associative, unary minus binds looser than ``^``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' unary)?
    base   := number | identifier | func '(' expr ')' | '(' expr ')'
    func   := exp | ln | sqrt | abs

Curves evaluate in IEEE doubles. :meth:`CostCurve.exact` evaluates in
rationals when the expression only needs field operations and integer
powers, which is what the finite peer game wants.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Union

import numpy as np

__all__ = [
    "ExprSyntaxError",
    "ExprDomainError",
    "CostCurve",
    "parse",
    "evaluate",
    "derivative",
    "differentiate",
]

VARIABLE = "x"
FUNCTIONS = ("exp", "ln", "sqrt", "abs")
VALIDATION_POINTS = 1001


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.text = text
        self.pos = pos


class ExprDomainError(ValueError):
    """Raised when an expression is evaluated outside its real domain."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    text: str
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = len(text) - len(text[pos:].lstrip())
            raise ExprSyntaxError("unexpected character", text, start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val, pos = self.take()
        if val != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}", self.text, pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", self.text, pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.factor()

    def factor(self) -> Node:
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def base(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(val, Fraction(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", self.text, pos)


def parse_ast(text: str) -> Node:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", text, 0)
    return _Parser(text).parse()


def to_text(node: Node) -> str:
    """Canonical printed form; parses back to an identical tree."""
    return _print(node, 0)


def _print(node: Node, parent: int) -> str:
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_print(node.arg, 0)})"
    if isinstance(node, Neg):
        prec = _PRECEDENCE["neg"]
        s = "-" + _print(node.operand, prec)
        return f"({s})" if prec < parent else s
    prec = _PRECEDENCE[node.op]
    if node.op == "^":
        # right-assoc: the left operand must bind tighter than '^'
        s = f"{_print(node.left, prec + 1)}^{_print(node.right, _PRECEDENCE['neg'])}"
    else:
        s = f"{_print(node.left, prec)} {node.op} {_print(node.right, prec + 1)}"
    return f"({s})" if prec < parent else s


def free_names(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return free_names(node.operand if isinstance(node, Neg) else node.arg)
    return free_names(node.left) | free_names(node.right)


# ---------------------------------------------------------------------------
# Evaluation


def _pow(base: float, expo: float) -> float:
    if base < 0 and not float(expo).is_integer():
        raise ExprDomainError(f"non-integer power {expo} of negative base {base}")
    if base == 0 and expo < 0:
        raise ExprDomainError("zero raised to a negative power")
    return math.pow(base, expo)


def _ln(v: float) -> float:
    if v <= 0:
        raise ExprDomainError(f"ln of non-positive value {v}")
    return math.log(v)


def _sqrt(v: float) -> float:
    if v < 0:
        raise ExprDomainError(f"sqrt of negative value {v}")
    return math.sqrt(v)


def _div(a: float, b: float) -> float:
    if b == 0:
        raise ExprDomainError("division by zero")
    return a / b


_FLOAT_FUNCS: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "abs": abs,
}


def _compile(node: Node, env: Mapping[str, float]) -> Callable[[float], float]:
    """Turn the tree into nested closures; parameters are folded in."""
    if isinstance(node, Num):
        c = float(node.value)
        return lambda x: c
    if isinstance(node, Var):
        if node.name == VARIABLE:
            return lambda x: x
        c = float(env[node.name])
        return lambda x: c
    if isinstance(node, Neg):
        f = _compile(node.operand, env)
        return lambda x: -f(x)
    if isinstance(node, Call):
        f = _compile(node.arg, env)
        g = _FLOAT_FUNCS[node.func]
        return lambda x: g(f(x))
    lhs = _compile(node.left, env)
    rhs = _compile(node.right, env)
    if node.op == "+":
        return lambda x: lhs(x) + rhs(x)
    if node.op == "-":
        return lambda x: lhs(x) - rhs(x)
    if node.op == "*":
        return lambda x: lhs(x) * rhs(x)
    if node.op == "/":
        return lambda x: _div(lhs(x), rhs(x))
    return lambda x: _pow(lhs(x), rhs(x))


_NP_FUNCS = {"exp": np.exp, "ln": np.log, "sqrt": np.sqrt, "abs": np.abs}


def _compile_np(node: Node, env: Mapping[str, float]) -> Callable[[np.ndarray], np.ndarray]:
    """Array version of :func:`_compile`; domain violations give NaN."""
    if isinstance(node, Num):
        c = float(node.value)
        return lambda x: np.full_like(x, c)
    if isinstance(node, Var):
        if node.name == VARIABLE:
            return lambda x: x
        c = float(env[node.name])
        return lambda x: np.full_like(x, c)
    if isinstance(node, Neg):
        f = _compile_np(node.operand, env)
        return lambda x: -f(x)
    if isinstance(node, Call):
        f = _compile_np(node.arg, env)
        g = _NP_FUNCS[node.func]
        return lambda x: _finite_or_nan(g(f(x)))
    lhs = _compile_np(node.left, env)
    rhs = _compile_np(node.right, env)
    op = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}[node.op]
    return lambda x: _finite_or_nan(op(lhs(x), rhs(x)))


def _finite_or_nan(v: np.ndarray) -> np.ndarray:
    # the scalar evaluator raises where an intermediate leaves the reals, so
    # an infinity must not be allowed to come back finite (as in 1/inf)
    return np.where(np.isfinite(v), v, np.nan)


def _is_const(node: Node) -> bool:
    return VARIABLE not in free_names(node)


def _add(a: Node, b: Node, op: str = "+") -> Node:
    if isinstance(b, Num) and b.value == 0:
        return a
    if isinstance(a, Num) and a.value == 0:
        return b if op == "+" else Neg(b)
    return BinOp(op, a, b)


def _mul(a: Node, b: Node) -> Node:
    for u, w in ((a, b), (b, a)):
        if isinstance(u, Num) and u.value == 0:
            return Num("0", Fraction(0))
        if isinstance(u, Num) and u.value == 1:
            return w
    return BinOp("*", a, b)


def differentiate(node: Node) -> Node:
    """Symbolic derivative with respect to ``x`` (zero terms pruned)."""
    zero = Num("0", Fraction(0))
    if isinstance(node, Num):
        return zero
    if isinstance(node, Var):
        return Num("1", Fraction(1)) if node.name == VARIABLE else zero
    if isinstance(node, Neg):
        d = differentiate(node.operand)
        return zero if d == zero else Neg(d)
    if isinstance(node, Call):
        f, d = node.arg, differentiate(node.arg)
        if d == zero:
            return zero
        outer = {
            "exp": node,
            "ln": BinOp("/", Num("1", Fraction(1)), f),
            "sqrt": BinOp("/", Num("1", Fraction(1)), BinOp("*", Num("2", Fraction(2)), node)),
            "abs": BinOp("/", f, node),
        }[node.func]
        return _mul(outer, d)
    a, b = node.left, node.right
    da, db = differentiate(a), differentiate(b)
    if node.op in "+-":
        return _add(da, db, node.op)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if node.op == "/":
        top = _add(_mul(da, b), _mul(a, db), "-")
        return BinOp("/", top, BinOp("^", b, Num("2", Fraction(2))))
    # power
    if _is_const(b):
        lower = BinOp("-", b, Num("1", Fraction(1)))
        return _mul(_mul(b, BinOp("^", a, lower)), da)
    inner = _add(_mul(db, Call("ln", a)), BinOp("/", _mul(b, da), a))
    return _mul(node, inner)


class _Inexact(Exception):
    pass


def _exact(node: Node, x: Fraction, env: Mapping[str, Fraction]) -> Fraction:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == VARIABLE else env[node.name]
    if isinstance(node, Neg):
        return -_exact(node.operand, x, env)
    if isinstance(node, Call):
        v = _exact(node.arg, x, env)
        if node.func == "abs":
            return abs(v)
        raise _Inexact
    a = _exact(node.left, x, env)
    b = _exact(node.right, x, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if b == 0:
            raise ExprDomainError("division by zero")
        return a / b
    if b.denominator != 1 or abs(b.numerator) > 64:
        raise _Inexact
    if a == 0 and b < 0:
        raise ExprDomainError("zero raised to a negative power")
    return a ** int(b)


@dataclass(frozen=True)
class CostCurve:
    """A parsed function of ``x`` with bound parameters.

    ``limits`` fills removable singularities: pairs ``(point, value)`` that
    are returned instead of evaluating the expression exactly at ``point``.
    """

    source: str
    ast: Node
    params: Mapping[str, float] = field(default_factory=dict)
    limits: tuple[tuple[float, float], ...] = ()
    _fn: Callable[[float], float] = field(init=False, repr=False, compare=False)
    _vec: Callable[[np.ndarray], np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        unbound = free_names(self.ast) - {VARIABLE} - set(self.params)
        if unbound:
            raise ExprSyntaxError(
                f"unknown identifier {sorted(unbound)[0]!r}", self.source, 0
            )
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "_fn", _compile(self.ast, self.params))
        object.__setattr__(self, "_vec", _compile_np(self.ast, self.params))

    def __call__(self, x: float) -> float:
        for point, value in self.limits:
            if x == point:
                return value
        try:
            y = self._fn(x)
        except (OverflowError, ZeroDivisionError) as exc:
            raise ExprDomainError(f"{self.source!r} at x={x}: {exc}") from exc
        except ExprDomainError as exc:
            raise ExprDomainError(f"{self.source!r} at x={x}: {exc}") from None
        if not math.isfinite(y):
            raise ExprDomainError(f"{self.source!r} is not finite at x={x}")
        return y

    def many(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate on an array; points outside the domain come back as NaN."""
        xs = np.asarray(xs, dtype=float)
        with np.errstate(all="ignore"):
            ys = self._vec(xs)
            for point, value in self.limits:
                ys = np.where(xs == point, value, ys)
        return ys

    def slope(self, x: float) -> float:
        """Exact derivative at ``x``; one-sided limits are not taken, so a
        removable singularity at ``x`` raises :class:`ExprDomainError`."""
        if any(point == x for point, _ in self.limits):
            raise ExprDomainError(f"no closed-form slope at the filled point x={x!r}")
        fn = self.__dict__.get("_slope")
        if fn is None:
            fn = _compile(differentiate(self.ast), self.params)
            object.__setattr__(self, "_slope", fn)
        try:
            val = fn(x)
        except (OverflowError, ZeroDivisionError) as exc:
            raise ExprDomainError(f"slope undefined at x={x!r}") from exc
        if math.isnan(val):
            raise ExprDomainError(f"slope undefined at x={x!r}")
        return val

    def exact(self, x: Fraction) -> Fraction | None:
        """Rational value at ``x`` or ``None`` if it is not reachable exactly."""
        for point, value in self.limits:
            if x == point:
                return Fraction(value)
        env = {k: Fraction(v) for k, v in self.params.items()}
        try:
            return _exact(self.ast, Fraction(x), env)
        except _Inexact:
            return None

    def validate(self, lo: float = 0.0, hi: float = 1.0, points: int = VALIDATION_POINTS) -> None:
        for k in range(points):
            self(lo + (hi - lo) * k / (points - 1))

    def canonical(self) -> str:
        return to_text(self.ast)

    def with_limit(self, point: float, value: float) -> "CostCurve":
        return CostCurve(self.source, self.ast, self.params, self.limits + ((point, value),))


def parse(
    text: str,
    params: Mapping[str, float] | None = None,
    *,
    validate: bool = True,
    limits: tuple[tuple[float, float], ...] = (),
) -> CostCurve:
    curve = CostCurve(text, parse_ast(text), params or {}, limits)
    if validate:
        curve.validate()
    return curve


def evaluate(curve: CostCurve, x: float) -> float:
    return curve(x)


def derivative(curve: Callable[[float], float], x: float, h: float = 1e-6) -> float:
    """Central difference, falling back to a second-order one-sided stencil
    when one side leaves the curve's domain."""
    try:
        lo = curve(x - h)
    except ExprDomainError:
        return (-3 * curve(x) + 4 * curve(x + h) - curve(x + 2 * h)) / (2 * h)
    try:
        hi = curve(x + h)
    except ExprDomainError:
        return (3 * curve(x) - 4 * curve(x - h) + curve(x - 2 * h)) / (2 * h)
    return (hi - lo) / (2 * h)
