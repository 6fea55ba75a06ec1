"""Taylor expansion of exact flows and Lie derivatives.

`flow_taylor` produces the truncated series of the solution of
dy/dt = f(y) about t = 0 by Picard iteration on jet coefficients:
c0 = x, c_{k+1} = [t^k coefficient of f(sum_j c_j t^j)] / (k+1).

`lie_derivative` evaluates (D^j g)(x) for the differential operator
Dg = g' f by reading the t^j coefficient of g along the expanded flow,
so no symbolic differentiation is ever required.
"""

import math

from .jets import Jet, fresh_var, jet_coeff, derivative_jet

__all__ = ["flow_taylor_coeffs", "flow_taylor", "lie_derivative",
           "gradient", "jacobian", "hessian_bilinear", "directional"]


def flow_taylor_coeffs(f, x, order):
    """Normalized Taylor coefficients of the flow: list of vectors c_0..c_K.

    The point x is any sequence of scalars (floats, arrays, jets); the
    returned coefficients live in the same algebra.
    """
    n = len(x)
    var = fresh_var()
    coeffs = [tuple(x)]
    for k in range(order):
        y = tuple(Jet(var, [coeffs[j][i] for j in range(k + 1)])
                  for i in range(n))
        fy = f(y)
        coeffs.append(tuple(jet_coeff(fy[i], var, k) / (k + 1)
                            for i in range(n)))
    return var, coeffs


def flow_taylor(f, x, order):
    """The flow as a vector of jets of the given order in a fresh variable t."""
    var, coeffs = flow_taylor_coeffs(f, x, order)
    return tuple(Jet(var, [coeffs[k][i] for k in range(order + 1)])
                 for i in range(len(x)))


def lie_derivative(f, g, x, j):
    """(D^j g)(x) with Dg = g'f, via the flow expansion of order j."""
    if j == 0:
        return tuple(g(x))
    y = flow_taylor(f, x, j)
    var = y[0].var
    gy = g(y)
    fact = math.factorial(j)
    return tuple(fact * jet_coeff(c, var, j) for c in gy)


def directional(f, x, v, k):
    """k-th directional derivatives along v: d^k/dt^k f(x + t v) / k!.

    Returns the list of coefficient vectors [f(x), f'(x)v, f''(x)(v,v)/2, ...].
    """
    if k == 0:
        return [tuple(f(x))]
    var = fresh_var()
    y = tuple(Jet(var, (xi, vi) + (0.0,) * (k - 1))
              for xi, vi in zip(x, v))
    fy = f(y)
    return [tuple(jet_coeff(c, var, j) for c in fy) for j in range(k + 1)]


def gradient(h, x):
    """Gradient of a scalar-valued function via one first-order jet per axis."""
    out = []
    for i in range(len(x)):
        y, var = derivative_jet(x, i)
        val = h(y)
        out.append(jet_coeff(val, var, 1))
    return tuple(out)


def jacobian(g, x):
    """Jacobian rows of a vector-valued function, as a nested tuple [i][j]."""
    n = len(x)
    cols = []
    for j in range(n):
        y, var = derivative_jet(x, j)
        gy = g(y)
        cols.append([jet_coeff(c, var, 1) for c in gy])
    return tuple(tuple(cols[j][i] for j in range(n)) for i in range(len(cols[0])))


def hessian_bilinear(h, x, u, v):
    """Second derivative form h''(x)(u, v) for scalar h, via two nested jets."""
    inner = fresh_var()
    outer = fresh_var()
    y = tuple(Jet(outer, (Jet(inner, (xi, vi)), ui))
              for xi, ui, vi in zip(x, u, v))
    val = h(y)
    return jet_coeff(jet_coeff(val, outer, 1), inner, 1)
