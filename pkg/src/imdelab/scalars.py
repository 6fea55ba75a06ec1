"""Generic scalar algebra.

Every numeric routine in this package is written against a small set of
operations (ring arithmetic plus sin/cos/exp/tanh/sigmoid and integer
powers).  Plain floats and numpy arrays support them natively; `jets.Jet`
and `autodiff.Tensor` supply matching methods.  Dispatch is duck-typed: if
the operand carries a method of the right name we call it, otherwise we
fall back to numpy.  This is what lets one integrator kernel run on
numbers, on batched arrays, on truncated series and on autodiff traces.
"""

import numpy as np

__all__ = ["sin", "cos", "exp", "tanh", "sigmoid", "powi", "const_term"]


def sin(x):
    if hasattr(x, "sin"):
        return x.sin()
    return np.sin(x)


def cos(x):
    if hasattr(x, "cos"):
        return x.cos()
    return np.cos(x)


def exp(x):
    if hasattr(x, "exp"):
        return x.exp()
    return np.exp(x)


def tanh(x):
    if hasattr(x, "tanh"):
        return x.tanh()
    return np.tanh(x)


def sigmoid(x):
    if hasattr(x, "sigmoid"):
        return x.sigmoid()
    # 1/(1+e^-x); overflow in the exp harmlessly saturates to 0 or 1.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def powi(x, n):
    """Integer power; the only power the scalar abstraction guarantees."""
    n = int(n)
    return x ** n


def const_term(x):
    """Descend through nested series to the underlying number/array."""
    while hasattr(x, "coeffs"):
        x = x.coeffs[0]
    return x
