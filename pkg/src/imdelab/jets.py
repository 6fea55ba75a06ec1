"""Truncated univariate Taylor series ("jets") over an arbitrary scalar algebra.

A `Jet` is a dense polynomial c0 + c1*t + ... + cK*t^K in one formal
variable, truncated at a fixed order K.  Coefficients may be floats, numpy
arrays (for batched evaluation) or further jets, so spatial derivatives are
obtained by nesting rather than by a multivariate type.

Each jet carries the integer id of its formal variable.  Fresh ids come
from a global counter, so a variable introduced later (deeper in a nested
computation) always has a larger id.  When two jets in different variables
meet, the one with the larger id is the enclosing structure and the other
is absorbed as a constant coefficient; this keeps nested perturbations
from being conflated.

Analytic primitives (sin, cos, exp, tanh, sigmoid) use the classical
coefficient recurrences derived from their defining ODEs, e.g.
s' = c*u', c' = -s*u' for sine/cosine, which are exact to the truncation
order at O(K^2) cost.
"""

import itertools

import numpy as np

from .errors import ZeroConstantTerm
from . import scalars

__all__ = ["Jet", "fresh_var", "variable", "jet_coeff", "derivative_jet"]

_VAR_IDS = itertools.count(1)


def fresh_var():
    """A new formal-variable id, strictly larger than all earlier ones."""
    return next(_VAR_IDS)


def variable(order, base=0.0, var=None):
    """The jet base + t of the given truncation order (t the fresh variable)."""
    if var is None:
        var = fresh_var()
    if order < 1:
        raise ValueError("a variable jet needs order >= 1")
    return Jet(var, (base, 1.0) + (0.0,) * (order - 1))


def _is_zero_const(c):
    c = scalars.const_term(c)
    if isinstance(c, np.ndarray):
        return bool(np.any(np.abs(c) < 1e-300))
    return abs(c) < 1e-300


class Jet:
    """Dense truncated Taylor value; immutable."""

    __slots__ = ("var", "coeffs")

    # keep numpy from broadcasting a jet across array operands elementwise;
    # arrays belong inside coefficients, so defer to our reflected ops
    __array_ufunc__ = None

    def __init__(self, var, coeffs):
        self.var = var
        self.coeffs = tuple(coeffs)

    @property
    def order(self):
        return len(self.coeffs) - 1

    def __repr__(self):
        return f"Jet(var={self.var}, coeffs={self.coeffs!r})"

    # -- helpers ----------------------------------------------------------

    def _wrap(self, coeffs):
        return Jet(self.var, coeffs)

    def _lift_const(self, c):
        """c as a constant jet in this variable, matching our order."""
        return Jet(self.var, (c,) + (0.0,) * self.order)

    def _same(self, other):
        """True when other is a jet in the same variable."""
        return isinstance(other, Jet) and other.var == self.var

    def _outer(self, other):
        """True when other is a jet in a strictly newer variable."""
        return isinstance(other, Jet) and other.var > self.var

    # -- ring operations --------------------------------------------------

    def __add__(self, other):
        if self._same(other):
            n = min(len(self.coeffs), len(other.coeffs))
            return self._wrap(tuple(a + b for a, b in
                                    zip(self.coeffs[:n], other.coeffs[:n])))
        if self._outer(other):
            return other + self
        return self._wrap((self.coeffs[0] + other,) + self.coeffs[1:])

    __radd__ = __add__

    def __sub__(self, other):
        if self._same(other):
            n = min(len(self.coeffs), len(other.coeffs))
            return self._wrap(tuple(a - b for a, b in
                                    zip(self.coeffs[:n], other.coeffs[:n])))
        if self._outer(other):
            return -other + self
        return self._wrap((self.coeffs[0] - other,) + self.coeffs[1:])

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self._wrap(tuple(-c for c in self.coeffs))

    def __pos__(self):
        return self

    def __mul__(self, other):
        if self._same(other):
            n = min(len(self.coeffs), len(other.coeffs))
            a, b = self.coeffs, other.coeffs
            out = []
            for k in range(n):
                acc = a[0] * b[k]
                for j in range(1, k + 1):
                    acc = acc + a[j] * b[k - j]
                out.append(acc)
            return self._wrap(out)
        if self._outer(other):
            return other * self
        return self._wrap(tuple(c * other for c in self.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if self._same(other):
            return _series_div(self, other)
        if self._outer(other):
            return other.__rtruediv__(self)
        return self._wrap(tuple(c / other for c in self.coeffs))

    def __rtruediv__(self, other):
        # other / self with other a constant (or inner jet)
        return _series_div(self._lift_const(other), self)

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("negative jet powers are not supported")
        result = self._lift_const(1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- analytic primitives ------------------------------------------------
    # All follow the pattern k*v_k = sum_{j=1..k} j*u_j * (dv/du)_{k-j} with
    # the derivative-series built from already-known coefficients.

    def exp(self):
        u = self.coeffs
        n = len(u)
        e = [scalars.exp(u[0])]
        for k in range(1, n):
            acc = 1 * u[1] * e[k - 1]
            for j in range(2, k + 1):
                acc = acc + j * u[j] * e[k - j]
            e.append(acc / k)
        return self._wrap(e)

    def _sincos(self):
        u = self.coeffs
        n = len(u)
        s = [scalars.sin(u[0])]
        c = [scalars.cos(u[0])]
        for k in range(1, n):
            sa = 1 * u[1] * c[k - 1]
            ca = 1 * u[1] * s[k - 1]
            for j in range(2, k + 1):
                sa = sa + j * u[j] * c[k - j]
                ca = ca + j * u[j] * s[k - j]
            s.append(sa / k)
            c.append((-ca) / k)
        return self._wrap(s), self._wrap(c)

    def sin(self):
        return self._sincos()[0]

    def cos(self):
        return self._sincos()[1]

    def tanh(self):
        # v' = (1 - v^2) u'
        u = self.coeffs
        n = len(u)
        v = [scalars.tanh(u[0])]
        vv = [v[0] * v[0]]
        for k in range(1, n):
            acc = None
            for j in range(1, k + 1):
                d = (1.0 - vv[0]) if k == j else -vv[k - j]
                term = j * u[j] * d
                acc = term if acc is None else acc + term
            vk = acc / k
            v.append(vk)
            conv = v[0] * vk
            for l in range(1, k + 1):
                conv = conv + v[l] * v[k - l]
            vv.append(conv)
        return self._wrap(v)

    def sigmoid(self):
        # v' = v (1 - v) u'
        u = self.coeffs
        n = len(u)
        v = [scalars.sigmoid(u[0])]
        g = [v[0] * (1.0 - v[0])]
        for k in range(1, n):
            acc = 1 * u[1] * g[k - 1]
            for j in range(2, k + 1):
                acc = acc + j * u[j] * g[k - j]
            vk = acc / k
            v.append(vk)
            conv = v[0] * vk
            for l in range(1, k + 1):
                conv = conv + v[l] * v[k - l]
            g.append(vk - conv)
        return self._wrap(v)


def _series_div(num, den):
    """Truncated series division; requires a nonzero constant term."""
    if _is_zero_const(den.coeffs[0]):
        raise ZeroConstantTerm("division by a series with zero constant term")
    n = min(len(num.coeffs), len(den.coeffs))
    a, b = num.coeffs, den.coeffs
    out = [a[0] / b[0]]
    for k in range(1, n):
        acc = a[k]
        for j in range(1, k + 1):
            acc = acc - b[j] * out[k - j]
        out.append(acc / b[0])
    return Jet(num.var, out)


def jet_coeff(x, var, k):
    """Coefficient of t^k of x viewed as a series in the variable `var`.

    Anything that is not a jet in `var` counts as a constant: coefficient
    x at k = 0 and zero above.
    """
    if isinstance(x, Jet) and x.var == var:
        return x.coeffs[k] if k < len(x.coeffs) else 0.0
    return x if k == 0 else 0.0


def derivative_jet(y, i, one=1.0):
    """Point y with component i perturbed along a fresh first-order jet."""
    var = fresh_var()
    return tuple(Jet(var, (c, one)) if j == i else c
                 for j, c in enumerate(y)), var
