"""Component expressions of chart coordinates.

Expressions are parsed into small immutable trees and evaluated as
second-order jets (value, gradient, hessian) so that Christoffel symbols,
covariant derivatives and second fundamental forms get exact partials.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := number | ident | ident "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus and is right-associative, so
``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

SQRT5 = math.sqrt(5.0)
SIGMA = (1.0 + SQRT5) / 2.0
SIGBAR = (1.0 - SQRT5) / 2.0

NAMED_CONSTANTS = {"sigma": SIGMA, "sigbar": SIGBAR}
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExpressionError(ValueError):
    """Base class for parse and evaluation failures."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed source; ``offset`` is the UTF-8 byte offset of the fault."""

    def __init__(self, message: str, char_offset: int, source: str = ""):
        self.offset = len(source[:char_offset].encode("utf-8")) if source else char_offset
        self.source = source
        super().__init__(f"{message} at byte offset {self.offset}")


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class ArityError(ExpressionSyntaxError):
    pass


class ExpressionDomainError(ExpressionError):
    """Evaluation left the domain of a function (log, sqrt, division, pow)."""

    def __init__(self, message: str, subexpression: "Expr"):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{to_source(subexpression)}'")


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str

    @property
    def value(self) -> float:
        return NAMED_CONSTANTS[self.name]


@dataclass(frozen=True)
class Var:
    index: int
    name: str = field(default="", compare=False)


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Const, Var, Neg, Func, BinOp]


def max_var_index(expr: Expr) -> int:
    """Largest coordinate index used by ``expr`` (-1 for constants)."""
    if isinstance(expr, Var):
        return expr.index
    if isinstance(expr, (Neg, Func)):
        return max_var_index(expr.arg)
    if isinstance(expr, BinOp):
        return max(max_var_index(expr.left), max_var_index(expr.right))
    return -1


def is_constant(expr: Expr) -> bool:
    return max_var_index(expr) < 0


# --------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, coordinate_names: Sequence[str]):
        self.source = source
        self.names = {name: i for i, name in enumerate(coordinate_names)}
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str):
        kind, value, offset = self.take()
        if value != text or kind != "op":
            found = value or "end of input"
            raise ExpressionSyntaxError(f"expected {text!r}, found {found!r}", offset, self.source)

    def parse(self) -> Expr:
        tree = self.expr()
        kind, value, offset = self.peek()
        if kind == "op" and value == ",":
            raise ArityError("unexpected ',' (functions take one argument)", offset, self.source)
        if kind != "eof":
            raise ExpressionSyntaxError(f"unexpected token {value!r}", offset, self.source)
        return tree

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, offset = self.take()
        if kind == "number":
            return Num(float(value))
        if kind == "ident":
            return self.identifier(value, offset)
        if kind == "op" and value == "(":
            node = self.expr()
            if self.peek()[1] == ",":
                raise ArityError("unexpected ','", self.peek()[2], self.source)
            self.expect(")")
            return node
        found = value or "end of input"
        raise ExpressionSyntaxError(f"unexpected {found!r}", offset, self.source)

    def identifier(self, name: str, offset: int) -> Expr:
        followed_by_paren = self.peek()[0] == "op" and self.peek()[1] == "("
        if name in FUNCTIONS:
            if not followed_by_paren:
                raise ArityError(f"function '{name}' needs one parenthesized argument", offset, self.source)
            self.take()
            if self.peek()[1] == ")":
                raise ArityError(f"function '{name}' called with no argument", offset, self.source)
            arg = self.expr()
            if self.peek()[1] == ",":
                raise ArityError(f"function '{name}' takes exactly one argument", self.peek()[2], self.source)
            self.expect(")")
            return Func(name, arg)
        if name in self.names or name in NAMED_CONSTANTS:
            if followed_by_paren:
                raise ArityError(f"'{name}' is not a function", offset, self.source)
            if name in self.names:
                return Var(self.names[name], name)
            return Const(name)
        raise UnknownIdentifierError(f"unknown identifier '{name}'", offset, self.source)


def parse_expression(source: str, coordinate_names: Sequence[str] = ()) -> Expr:
    """Parse ``source`` into an expression tree over ``coordinate_names``.

    Coordinate names shadow nothing: a chart may not use a builtin name.
    """
    clash = set(coordinate_names) & (set(FUNCTIONS) | set(NAMED_CONSTANTS))
    if clash:
        raise ValueError(f"coordinate names collide with builtins: {sorted(clash)}")
    return _Parser(source, coordinate_names).parse()


def to_source(expr: Expr) -> str:
    """Fully parenthesized source text; re-parses to an identical tree."""
    if isinstance(expr, Num):
        if expr.value < 0 or math.isnan(expr.value) or math.isinf(expr.value):
            raise ValueError(f"literal {expr.value!r} has no source form; use Neg")
        return repr(float(expr.value))
    if isinstance(expr, Const):
        return expr.name
    if isinstance(expr, Var):
        return expr.name or f"x{expr.index + 1}"
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.arg)})"
    if isinstance(expr, Func):
        return f"{expr.name}({to_source(expr.arg)})"
    return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"


# Builders used when structures are rebuilt symbolically.


def const(value: float) -> Expr:
    value = float(value)
    return Neg(Num(-value)) if value < 0 else Num(value)


def add(a: Expr, b: Expr) -> Expr:
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return BinOp("*", a, b)


def constant_value(expr: Expr) -> float:
    """Value of an expression that uses no coordinates."""
    result = _eval(expr, np.zeros(0))
    return float(result.value) if isinstance(result, Jet2) else float(result)


# --------------------------------------------------------------------------
# Second-order jets


class Jet2:
    """Value, gradient and hessian of a scalar at a point.

    The hessian is kept exactly symmetric: every update adds either a
    symmetric matrix or a symmetrized outer product.
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, value: float, n: int) -> "Jet2":
        return cls(value, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Jet2":
        grad = np.zeros(n)
        grad[index] = 1.0
        return cls(value, grad, np.zeros((n, n)))

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Jet2(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        return Jet2(self.value - other, self.grad, self.hess)

    def __rsub__(self, other):
        return Jet2(other - self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            a, b = self, other
            cross = np.outer(a.grad, b.grad)
            return Jet2(
                a.value * b.value,
                a.value * b.grad + b.value * a.grad,
                a.value * b.hess + b.value * a.hess + (cross + cross.T),
            )
        return Jet2(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__

    def apply(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a scalar function with derivatives f1, f2 at ``value``."""
        return Jet2(f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad))


def _unary(name: str, a, node: Expr):
    x = a.value if isinstance(a, Jet2) else a
    if name == "sin":
        s, c = math.sin(x), math.cos(x)
        derivs = (s, c, -s)
    elif name == "cos":
        s, c = math.sin(x), math.cos(x)
        derivs = (c, -s, -c)
    elif name == "exp":
        e = math.exp(x)
        derivs = (e, e, e)
    elif name == "log":
        if x <= 0.0:
            raise ExpressionDomainError(f"log of non-positive value {x!r}", node)
        derivs = (math.log(x), 1.0 / x, -1.0 / (x * x))
    elif name == "sqrt":
        if x < 0.0 or (x == 0.0 and isinstance(a, Jet2)):
            raise ExpressionDomainError(f"sqrt needs a positive argument, got {x!r}", node)
        r = math.sqrt(x)
        derivs = (r, 0.5 / r, -0.25 / (r * x)) if r else (0.0, 0.0, 0.0)
    else:  # pragma: no cover - parser rejects other names
        raise ExpressionError(f"unknown function {name}")
    if isinstance(a, Jet2):
        return a.apply(*derivs)
    return derivs[0]


def _power(base, exponent, node: BinOp):
    if isinstance(exponent, Jet2):
        # variable exponent: b^e = exp(e log b)
        b = base.value if isinstance(base, Jet2) else base
        if b <= 0.0:
            raise ExpressionDomainError(f"variable exponent needs positive base, got {b!r}", node)
        log_b = _unary("log", base, node)
        return _unary("exp", exponent * log_b, node)
    c = float(exponent)
    x = base.value if isinstance(base, Jet2) else base
    integral = c.is_integer()
    if not integral and x <= 0.0:
        if not (x == 0.0 and c > 0.0 and not isinstance(base, Jet2)):
            raise ExpressionDomainError(f"non-integer power {c!r} of non-positive base {x!r}", node)
    if x == 0.0 and c < 0.0:
        raise ExpressionDomainError("zero raised to a negative power", node)
    if not isinstance(base, Jet2):
        return x**c
    if integral:
        k = int(c)
        f0 = x**k
        f1 = k * x ** (k - 1) if k != 0 else 0.0
        f2 = k * (k - 1) * x ** (k - 2) if k not in (0, 1) else 0.0
    else:
        f0 = x**c
        f1 = c * x ** (c - 1.0)
        f2 = c * (c - 1.0) * x ** (c - 2.0)
    return base.apply(f0, f1, f2)


def _eval(expr: Expr, point: np.ndarray):
    """Evaluate to a Jet2, or to a plain float for coordinate-free subtrees."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        n = len(point)
        if expr.index >= n:
            raise ExpressionError(f"variable index {expr.index} out of range for dimension {n}")
        return Jet2.variable(point[expr.index], expr.index, n)
    if isinstance(expr, Neg):
        return -_eval(expr.arg, point)
    if isinstance(expr, Func):
        return _unary(expr.name, _eval(expr.arg, point), expr)
    left = _eval(expr.left, point)
    right = _eval(expr.right, point)
    op = expr.op
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        d = right.value if isinstance(right, Jet2) else right
        if d == 0.0:
            raise ExpressionDomainError("division by zero", expr)
        if isinstance(right, Jet2):
            inv = right.apply(1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d))
            return left * inv
        return left * (1.0 / d) if isinstance(left, Jet2) else left / d
    if op == "^":
        return _power(left, right, expr)
    raise ExpressionError(f"unknown operator {op}")  # pragma: no cover


def jet_evaluate(expr: Expr, point: Sequence[float]) -> Jet2:
    """Value, gradient and hessian of ``expr`` at ``point``."""
    p = np.asarray(point, dtype=float)
    result = _eval(expr, p)
    if isinstance(result, Jet2):
        return result
    return Jet2.constant(result, len(p))


def evaluate(expr: Expr, point: Sequence[float]) -> float:
    return jet_evaluate(expr, point).value


def jet_matrix(exprs, point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jets of a vector or matrix of expressions as (values, grads, hessians).

    For an input of shape S the outputs have shapes S, S+(n,), S+(n,n).
    """
    p = np.asarray(point, dtype=float)
    n = len(p)
    if len(exprs) and isinstance(exprs[0], (list, tuple)):
        shape = (len(exprs), len(exprs[0]))
        flat = [e for row in exprs for e in row]
    else:
        shape = (len(exprs),)
        flat = list(exprs)
    values = np.empty(len(flat))
    grads = np.zeros((len(flat), n))
    hesses = np.zeros((len(flat), n, n))
    for idx, e in enumerate(flat):
        r = _eval(e, p)
        if isinstance(r, Jet2):
            values[idx] = r.value
            grads[idx] = r.grad
            hesses[idx] = r.hess
        else:
            values[idx] = r
    return values.reshape(shape), grads.reshape(shape + (n,)), hesses.reshape(shape + (n, n))
