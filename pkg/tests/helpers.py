"""Shared independent oracles for the test suite.

These stay deliberately separate from the library code paths they check:
finite differences for derivatives and Jacobians, direct summation for
quadratures, hand-rolled forward passes for networks.
"""

import numpy as np


def fd_jacobian(map_fn, x, eps=1e-3):
    """Five-point central-difference Jacobian, O(eps^4) accurate."""
    x = np.asarray(x, dtype=float)
    n = x.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        f2p = np.asarray(map_fn(tuple(x + 2 * eps * e)), dtype=float)
        f1p = np.asarray(map_fn(tuple(x + eps * e)), dtype=float)
        f1m = np.asarray(map_fn(tuple(x - eps * e)), dtype=float)
        f2m = np.asarray(map_fn(tuple(x - 2 * eps * e)), dtype=float)
        cols.append((-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * eps))
    return np.stack(cols, axis=1)


def fd_gradient(scalar_fn, x, eps=1e-5):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = eps
        g[j] = (scalar_fn(x + e) - scalar_fn(x - e)) / (2 * eps)
    return g


def max_abs(v):
    return float(np.max(np.abs(np.asarray(v, dtype=float))))


def vec_diff(a, b):
    return max(abs(float(x) - float(y)) for x, y in zip(a, b))


def random_points(box, n, seed):
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return rng.uniform(lo, hi, size=(n, len(box)))
