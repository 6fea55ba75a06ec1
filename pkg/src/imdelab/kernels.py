"""Hot elementwise kernels with a numba fast path and a numpy fallback.

The training loop spends most of its time in a handful of elementwise
operations (activation backward passes, the fused Adam update, squared
errors).  Each has a pure-numpy implementation and, when numba is
importable, an @njit twin that fuses the loops and skips temporaries.

Selection happens once at import: set IMDELAB_NO_NUMBA=1 to force the
numpy path (or simply uninstall numba).  `benchmarks/bench_kernels.py`
times the two backends against each other.

Everything here is deterministic: no fastmath, no parallel reductions.
"""

import math
import os

import numpy as np

__all__ = ["BACKEND", "NUMPY_IMPLS", "NUMBA_IMPLS",
           "sigmoid_fwd", "sigmoid_bwd", "tanh_bwd", "adam_update",
           "sqdiff_sum"]


# -- numpy implementations ----------------------------------------------------

def _np_sigmoid_fwd(x):
    # exp overflow for very negative x saturates harmlessly to 1/inf = 0
    out = np.negative(x)
    with np.errstate(over="ignore"):
        np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def _np_sigmoid_bwd(g, y):
    return g * y * (1.0 - y)


def _np_tanh_bwd(g, y):
    return g * (1.0 - y * y)


def _np_adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    p -= lr * (m * bc1) / (np.sqrt(v * bc2) + eps)


def _np_sqdiff_sum(a, b):
    d = (a - b).ravel()
    return float(np.dot(d, d))


NUMPY_IMPLS = {
    "sigmoid_fwd": _np_sigmoid_fwd,
    "sigmoid_bwd": _np_sigmoid_bwd,
    "tanh_bwd": _np_tanh_bwd,
    "adam_update": _np_adam_update,
    "sqdiff_sum": _np_sqdiff_sum,
}


# -- numba implementations ------------------------------------------------------
# The jitted loops write through .ravel() views, so the thin wrappers make
# the inputs contiguous first (cheap no-op for the arrays the tape produces).

def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def _sigmoid_bwd(g, y):
        out = np.empty_like(g)
        gf, yf, of = g.ravel(), y.ravel(), out.ravel()
        for i in range(gf.size):
            of[i] = gf[i] * yf[i] * (1.0 - yf[i])
        return out

    @njit(cache=True)
    def _tanh_bwd(g, y):
        out = np.empty_like(g)
        gf, yf, of = g.ravel(), y.ravel(), out.ravel()
        for i in range(gf.size):
            of[i] = gf[i] * (1.0 - yf[i] * yf[i])
        return out

    @njit(cache=True)
    def _adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
        pf, gf, mf, vf = p.ravel(), g.ravel(), m.ravel(), v.ravel()
        for i in range(pf.size):
            mi = b1 * mf[i] + (1.0 - b1) * gf[i]
            vi = b2 * vf[i] + (1.0 - b2) * gf[i] * gf[i]
            mf[i] = mi
            vf[i] = vi
            pf[i] -= lr * (mi * bc1) / (math.sqrt(vi * bc2) + eps)

    @njit(cache=True)
    def _sqdiff_sum(a, b):
        af, bf = a.ravel(), b.ravel()
        acc = 0.0
        for i in range(af.size):
            d = af[i] - bf[i]
            acc += d * d
        return acc

    c = np.ascontiguousarray

    def sigmoid_bwd(g, y):
        return _sigmoid_bwd(c(g), c(y))

    def tanh_bwd(g, y):
        return _tanh_bwd(c(g), c(y))

    def adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
        _adam_update(p, c(g), m, v, lr, b1, b2, eps, bc1, bc2)

    def sqdiff_sum(a, b):
        return _sqdiff_sum(c(a), c(b))

    return {
        # exp-bound: numpy's vectorized exp beats a scalar-libm njit loop
        # (see benchmarks/bench_kernels.py), so the forward stays numpy
        "sigmoid_fwd": _np_sigmoid_fwd,
        "sigmoid_bwd": sigmoid_bwd,
        "tanh_bwd": tanh_bwd,
        "adam_update": adam_update,
        "sqdiff_sum": sqdiff_sum,
    }


def _pick_backend():
    if os.environ.get("IMDELAB_NO_NUMBA", "").strip() not in ("", "0"):
        return "numpy", None
    try:
        impls = _build_numba_impls()
    except ImportError:
        return "numpy", None
    return "numba", impls


BACKEND, NUMBA_IMPLS = _pick_backend()
_ACTIVE = NUMBA_IMPLS if BACKEND == "numba" else NUMPY_IMPLS

sigmoid_fwd = _ACTIVE["sigmoid_fwd"]
sigmoid_bwd = _ACTIVE["sigmoid_bwd"]
tanh_bwd = _ACTIVE["tanh_bwd"]
adam_update = _ACTIVE["adam_update"]
sqdiff_sum = _ACTIVE["sqdiff_sum"]
