"""Closed-form vector fields as expression trees.

A `FieldExpr` holds one expression per component over variables y1..yN and
named parameters.  Evaluation is defined over any scalar algebra (floats,
batched arrays, jets, autodiff tensors), which is what the series
machinery relies on.

The text format is plain prefix notation with fixed arities:

    binary:  + - * / pow      unary:  sin cos exp tanh sigmoid
    leaves:  y1..yN, numeric literals, any other identifier = parameter

e.g. the pendulum momentum equation -(g/l) sin(y2) reads
``* * -1 / g l sin y2``.
"""

from dataclasses import dataclass

import numpy as np

from . import scalars
from .errors import UnboundParameter

__all__ = ["Expr", "Const", "Var", "Param", "FieldExpr",
           "sin", "cos", "exp", "tanh", "sigmoid",
           "parse_field", "parse_expr"]

_BINARY = {"+", "-", "*", "/", "pow"}
_UNARY = {"sin", "cos", "exp", "tanh", "sigmoid"}


class Expr:
    """Base node; subclasses are immutable."""

    def __add__(self, other):
        return Bin("+", self, _as_expr(other))

    def __radd__(self, other):
        return Bin("+", _as_expr(other), self)

    def __sub__(self, other):
        return Bin("-", self, _as_expr(other))

    def __rsub__(self, other):
        return Bin("-", _as_expr(other), self)

    def __mul__(self, other):
        return Bin("*", self, _as_expr(other))

    def __rmul__(self, other):
        return Bin("*", _as_expr(other), self)

    def __truediv__(self, other):
        return Bin("/", self, _as_expr(other))

    def __rtruediv__(self, other):
        return Bin("/", _as_expr(other), self)

    def __neg__(self):
        return Bin("*", Const(-1.0), self)

    def __pow__(self, n):
        return Bin("pow", self, Const(float(int(n))))


def _as_expr(x):
    if isinstance(x, Expr):
        return x
    return Const(float(x))


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based, matching the y1..yN syntax


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Un(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr


def sin(x):
    return Un("sin", _as_expr(x))


def cos(x):
    return Un("cos", _as_expr(x))


def exp(x):
    return Un("exp", _as_expr(x))


def tanh(x):
    return Un("tanh", _as_expr(x))


def sigmoid(x):
    return Un("sigmoid", _as_expr(x))


_UNARY_FN = {"sin": scalars.sin, "cos": scalars.cos, "exp": scalars.exp,
             "tanh": scalars.tanh, "sigmoid": scalars.sigmoid}


def _eval(e, y, params):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return y[e.index - 1]
    if isinstance(e, Param):
        try:
            return params[e.name]
        except KeyError:
            raise UnboundParameter(f"parameter '{e.name}' has no value") from None
    if isinstance(e, Un):
        return _UNARY_FN[e.op](_eval(e.arg, y, params))
    a = _eval(e.left, y, params)
    op = e.op
    if op == "pow":
        return scalars.powi(a, _eval(e.right, y, params))
    b = _eval(e.right, y, params)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    raise ValueError(f"unknown operator {op!r}")


class FieldExpr:
    """An N-component vector field of closed-form expressions.

    Calling an instance on a point (sequence of N scalars of any supported
    algebra) returns the tuple of component values.
    """

    def __init__(self, components, params=None, dim=None, name=""):
        self.components = tuple(components)
        self.params = dict(params or {})
        self.dim = dim if dim is not None else len(self.components)
        self.name = name

    def __call__(self, y):
        if len(y) != self.dim:
            raise ValueError(f"field expects dimension {self.dim}, got {len(y)}")
        return tuple(_eval(c, y, self.params) for c in self.components)

    def with_params(self, **updates):
        p = dict(self.params)
        p.update(updates)
        return FieldExpr(self.components, p, dim=self.dim, name=self.name)

    def at_array(self, pts):
        """Evaluate at an (n, N) array of points; returns an (n, N) array."""
        pts = np.asarray(pts, dtype=float)
        comps = self(tuple(pts[:, i] for i in range(self.dim)))
        return np.stack([np.broadcast_to(c, pts.shape[0]) for c in comps], axis=1)

    def serialize(self):
        return "; ".join(_to_prefix(c) for c in self.components)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<FieldExpr{tag} dim={self.dim}: {self.serialize()}>"


def eval_field(f, y):
    """Componentwise evaluation of a field at a point of any scalar algebra."""
    return f(y)


def _to_prefix(e):
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"y{e.index}"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Un):
        return f"{e.op} {_to_prefix(e.arg)}"
    return f"{e.op} {_to_prefix(e.left)} {_to_prefix(e.right)}"


def parse_expr(text):
    """Parse one prefix-notation expression."""
    tokens = text.split()
    expr, rest = _parse(tokens)
    if rest:
        raise ValueError(f"trailing tokens after expression: {' '.join(rest)}")
    return expr


def parse_field(text, params=None, dim=None, name=""):
    """Parse a field: component expressions separated by ';'."""
    comps = [parse_expr(part) for part in text.split(";") if part.strip()]
    return FieldExpr(comps, params, dim=dim, name=name)


def _parse(tokens):
    if not tokens:
        raise ValueError("unexpected end of expression")
    tok, rest = tokens[0], tokens[1:]
    if tok in _BINARY:
        left, rest = _parse(rest)
        right, rest = _parse(rest)
        return Bin(tok, left, right), rest
    if tok in _UNARY:
        arg, rest = _parse(rest)
        return Un(tok, arg), rest
    if tok.startswith("y") and tok[1:].isdigit():
        return Var(int(tok[1:])), rest
    try:
        return Const(float(tok)), rest
    except ValueError:
        pass
    if tok.isidentifier():
        return Param(tok), rest
    raise ValueError(f"cannot parse token {tok!r}")
