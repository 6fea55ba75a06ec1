"""Numerical integrators, generic over the scalar algebra.

One set of stepping kernels serves three callers: plain numbers (time
stepping), jets in the step size (series expansion of the method map) and
autodiff tensors (training through the solver).  Implicit stages are
solved by fixed-point iteration; over jets the iteration runs a fixed
number of sweeps because each sweep settles one more power of h.

`reference_flow` is an adaptive Taylor-series integrator of order 20 built
on the same jet kernel; with the default tolerance 1e-13 it serves as the
ground truth for every experiment.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet
from .flows import flow_taylor_coeffs, gradient
from .errors import (NoConvergence, StepUnderflow, DegenerateError,
                     NotWeaklyStable, NotConsistent)

__all__ = ["ButcherTableau", "LmmScheme", "SolverSpec",
           "RungeKuttaMethod", "SymplecticEulerMethod", "ComposedMethod",
           "method_by_name", "TABLEAUS", "LMM_SCHEMES",
           "rk_step", "ode_solve", "symplectic_euler_step",
           "lmm_trajectory", "reference_flow", "reference_trajectory",
           "order_estimate"]

_FP_TOL = 1e-14
_FP_MAX_SWEEPS = 100


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients (a_ij, b_i, c_i) with declared order p."""

    name: str
    a: tuple
    b: tuple
    order: int
    c: tuple = field(default=())

    def __post_init__(self):
        a = tuple(tuple(float(x) for x in row) for row in self.a)
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not self.c:
            object.__setattr__(self, "c", tuple(sum(row) for row in a))
        if abs(sum(b) - 1.0) > 1e-12:
            raise ValueError(f"tableau {self.name!r}: sum(b) must be 1")
        for i, row in enumerate(a):
            if len(row) != len(b):
                raise ValueError(f"tableau {self.name!r}: a must be s x s")
            if abs(self.c[i] - sum(row)) > 1e-12:
                raise ValueError(f"tableau {self.name!r}: c_i must equal row sums")

    @property
    def stages(self):
        return len(self.b)

    @property
    def explicit(self):
        return all(self.a[i][j] == 0.0 for i in range(self.stages)
                   for j in range(i, self.stages))


@dataclass(frozen=True)
class LmmScheme:
    """Linear multistep coefficients alpha_m, beta_m, m = 0..M."""

    name: str
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        alpha = tuple(float(x) for x in self.alpha)
        beta = tuple(float(x) for x in self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if len(alpha) != len(beta):
            raise ValueError("alpha and beta must have equal length M+1")
        if alpha[-1] == 0.0:
            raise ValueError("alpha_M must be nonzero")
        if abs(alpha[0]) + abs(beta[0]) == 0.0:
            raise ValueError("need |alpha_0| + |beta_0| > 0")

    @property
    def steps(self):
        return len(self.alpha) - 1

    @property
    def implicit(self):
        return self.beta[-1] != 0.0

    def require_weakly_stable(self):
        if abs(sum(m * a for m, a in enumerate(self.alpha))) < 1e-14:
            raise NotWeaklyStable(f"scheme {self.name!r}: sum(m*alpha_m) = 0")

    def require_consistent(self):
        if abs(sum(self.alpha)) > 1e-12:
            raise NotConsistent(f"scheme {self.name!r}: sum(alpha_m) != 0")
        if abs(sum(m * a for m, a in enumerate(self.alpha)) - sum(self.beta)) > 1e-12:
            raise NotConsistent(
                f"scheme {self.name!r}: sum(m*alpha_m) != sum(beta_m)")


TABLEAUS = {
    "euler": ButcherTableau("euler", a=((0.0,),), b=(1.0,), order=1),
    "implicit-euler": ButcherTableau("implicit-euler", a=((1.0,),), b=(1.0,),
                                     order=1),
    "explicit-midpoint": ButcherTableau("explicit-midpoint",
                                        a=((0.0, 0.0), (0.5, 0.0)),
                                        b=(0.0, 1.0), order=2),
    "rk4": ButcherTableau("rk4",
                          a=((0.0, 0.0, 0.0, 0.0),
                             (0.5, 0.0, 0.0, 0.0),
                             (0.0, 0.5, 0.0, 0.0),
                             (0.0, 0.0, 1.0, 0.0)),
                          b=(1 / 6, 1 / 3, 1 / 3, 1 / 6), order=4),
}
TABLEAUS["midpoint"] = TABLEAUS["explicit-midpoint"]

LMM_SCHEMES = {
    "ab2": LmmScheme("ab2", alpha=(0.0, -1.0, 1.0), beta=(-0.5, 1.5, 0.0)),
    "ab3": LmmScheme("ab3", alpha=(0.0, 0.0, -1.0, 1.0),
                     beta=(5 / 12, -16 / 12, 23 / 12, 0.0)),
    "trapezoidal": LmmScheme("trapezoidal", alpha=(-1.0, 1.0), beta=(0.5, 0.5)),
    "implicit-euler": LmmScheme("implicit-euler", alpha=(-1.0, 1.0),
                                beta=(0.0, 1.0)),
}


# -- generic point arithmetic -------------------------------------------------

def _combine(y0, h, pairs):
    """y0 + h * sum(w * k for w, k in pairs) for tuple or array-like points."""
    pairs = [(w, k) for w, k in pairs if w != 0.0]
    if isinstance(y0, tuple):
        if not pairs:
            return y0
        out = []
        for i, yi in enumerate(y0):
            acc = None
            for w, k in pairs:
                term = k[i] if w == 1.0 else w * k[i]
                acc = term if acc is None else acc + term
            out.append(yi + h * acc)
        return tuple(out)
    if not pairs:
        return y0
    acc = None
    for w, k in pairs:
        term = k if w == 1.0 else w * k
        acc = term if acc is None else acc + term
    return y0 + h * acc


def _max_abs_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_abs_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _max_abs(a):
    if isinstance(a, tuple):
        return max(_max_abs(x) for x in a)
    return float(np.max(np.abs(np.asarray(a))))


def _jet_sweeps(h):
    """Fixed sweep count when the step is a jet: the valuation of the
    stage error increases every sweep, so order+2 sweeps are exact."""
    return h.order + 2 if isinstance(h, Jet) else None


def _damp(old, new, w):
    if isinstance(old, tuple):
        return tuple(o + w * (n - o) for o, n in zip(old, new))
    return old + w * (new - old)


def _scalar_fn(h_like):
    """Normalize a scalar-valued function (FieldExpr or callable)."""
    if hasattr(h_like, "components"):
        return lambda y: h_like(y)[0]
    return h_like


# -- Runge-Kutta stepping ------------------------------------------------------

def rk_step(tab, f, y0, h, damping=1.0):
    """One Runge-Kutta step y0 -> y1 over any scalar algebra.

    Explicit tableaus are solved by forward substitution.  Implicit ones
    iterate k_i = f(y0 + h sum_j a_ij k_j) from k_i = f(y0); plain-number
    mode stops at tolerance 1e-14 (NoConvergence after 100 sweeps), jet
    mode runs exactly order+2 sweeps.
    """
    s = tab.stages
    if tab.explicit:
        ks = []
        for i in range(s):
            yi = _combine(y0, h, zip(tab.a[i][:i], ks))
            ks.append(f(yi))
        return _combine(y0, h, zip(tab.b, ks))

    ks = [f(y0)] * s
    sweeps = _jet_sweeps(h)
    if sweeps is not None:
        for _ in range(sweeps):
            ks = [f(_combine(y0, h, zip(tab.a[i], ks))) for i in range(s)]
        return _combine(y0, h, zip(tab.b, ks))

    for sweep in range(_FP_MAX_SWEEPS):
        new = [f(_combine(y0, h, zip(tab.a[i], ks))) for i in range(s)]
        if damping != 1.0:
            new = [_damp(k, n, damping) for k, n in zip(ks, new)]
        diff = max(_max_abs_diff(a, b) for a, b in zip(ks, new))
        ks = new
        scale = 1.0 + max(_max_abs(k) for k in ks)
        if diff <= _FP_TOL * scale:
            return _combine(y0, h, zip(tab.b, ks))
    raise NoConvergence(_FP_MAX_SWEEPS, diff)


def symplectic_euler_step(H, y0, h, grad=None):
    """Symplectic Euler map for a Hamiltonian H(p, q):

        pbar = p - h * dH/dq(pbar, q),   qbar = q + h * dH/dp(pbar, q).

    H is a scalar-valued callable/FieldExpr over the full point (p, q);
    its partials are taken with nested jets, so the map itself stays
    evaluable over jets.  The implicit pbar equation is solved by fixed
    point, which terminates after one correction for separable H.
    """
    n2 = len(y0)
    if n2 % 2:
        from .errors import OddDimension
        raise OddDimension("symplectic Euler needs even dimension")
    n = n2 // 2
    if grad is None:
        hfun = _scalar_fn(H)
        grad = lambda y: gradient(hfun, y)
    p, q = tuple(y0[:n]), tuple(y0[n:])

    def p_update(pbar):
        g = grad(pbar + q)
        return tuple(p[i] - h * g[n + i] for i in range(n))

    pbar = p
    sweeps = _jet_sweeps(h)
    if sweeps is not None:
        for _ in range(sweeps):
            pbar = p_update(pbar)
    else:
        for sweep in range(_FP_MAX_SWEEPS):
            new = p_update(pbar)
            diff = _max_abs_diff(new, pbar)
            pbar = new
            if diff <= _FP_TOL * (1.0 + _max_abs(pbar)):
                break
        else:
            raise NoConvergence(_FP_MAX_SWEEPS, diff)
    g = grad(pbar + q)
    qbar = tuple(q[i] + h * g[i] for i in range(n))
    return pbar + qbar


# -- method adapters -----------------------------------------------------------

class RungeKuttaMethod:
    """Adapter giving every integrator the same step(f, y, h) surface."""

    def __init__(self, tab):
        self.tab = tab
        self.name = tab.name
        self.order = tab.order

    def step(self, f, y, h):
        return rk_step(self.tab, f, y, h)


class SymplecticEulerMethod:
    """Symplectic Euler written for a general field g = (g_p, g_q):

        pbar = p + h * g_p(pbar, q),   qbar = q + h * g_q(pbar, q),

    which reduces to the Hamiltonian form when g = J^{-1} grad H.
    """

    name = "symplectic-euler"
    order = 1

    def step(self, f, y, h):
        n2 = len(y)
        n = n2 // 2
        p, q = tuple(y[:n]), tuple(y[n:])

        def p_update(pbar):
            g = f(pbar + q)
            return tuple(p[i] + h * g[i] for i in range(n))

        pbar = p
        sweeps = _jet_sweeps(h)
        if sweeps is not None:
            for _ in range(sweeps):
                pbar = p_update(pbar)
        else:
            for sweep in range(_FP_MAX_SWEEPS):
                new = p_update(pbar)
                diff = _max_abs_diff(new, pbar)
                pbar = new
                if diff <= _FP_TOL * (1.0 + _max_abs(pbar)):
                    break
            else:
                raise NoConvergence(_FP_MAX_SWEEPS, diff)
        g = f(pbar + q)
        qbar = tuple(q[i] + h * g[n + i] for i in range(n))
        return pbar + qbar


class ComposedMethod:
    """S compositions viewed as a single map whose step is the full span."""

    def __init__(self, base, s):
        self.base = base
        self.s = int(s)
        self.name = f"{base.name}^{s}"
        self.order = base.order

    def step(self, f, y, h):
        sub = h * (1.0 / self.s)
        for _ in range(self.s):
            y = self.base.step(f, y, sub)
        return y


def method_by_name(name):
    if name == "symplectic-euler":
        return SymplecticEulerMethod()
    if name in TABLEAUS:
        return RungeKuttaMethod(TABLEAUS[name])
    raise KeyError(f"unknown method {name!r}")


@dataclass(frozen=True)
class SolverSpec:
    """An ODE solver: S compositions of a one-step method at step h."""

    method: object  # ButcherTableau, method adapter, or method name
    h: float
    s: int = 1

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("composition count S must be >= 1")
        m = self.method
        if isinstance(m, str):
            m = method_by_name(m)
        elif isinstance(m, ButcherTableau):
            m = RungeKuttaMethod(m)
        object.__setattr__(self, "method", m)

    @property
    def span(self):
        return self.s * self.h


def ode_solve(spec, f, x):
    """S-fold composition of the one-step method: ODESolve(x, f, T=S*h)."""
    y = x
    for _ in range(spec.s):
        y = spec.method.step(f, y, spec.h)
    return y


# -- linear multistep ----------------------------------------------------------

def lmm_trajectory(scheme, f, startup, h, n_steps):
    """Extend M startup points by n_steps of the multistep recurrence.

    Each new point solves sum_m alpha_m y_{i+m} = h sum_m beta_m f(y_{i+m});
    implicit schemes (beta_M != 0) use the same fixed-point treatment as
    rk_step.
    """
    M = scheme.steps
    if len(startup) != M:
        raise ValueError(f"need exactly M={M} startup points")
    ys = [tuple(p) for p in startup]
    aM = scheme.alpha[-1]
    bM = scheme.beta[-1]
    for i in range(n_steps):
        window = ys[-M:]
        fs = [f(p) for p in window]
        known = []
        for dim in range(len(window[0])):
            acc = 0.0
            for m in range(M):
                acc = acc + h * scheme.beta[m] * fs[m][dim] \
                    - scheme.alpha[m] * window[m][dim]
            known.append(acc)
        if bM == 0.0:
            new = tuple(k / aM for k in known)
        else:
            new = window[-1]
            for sweep in range(_FP_MAX_SWEEPS):
                fy = f(new)
                cand = tuple((known[d] + h * bM * fy[d]) / aM
                             for d in range(len(known)))
                diff = _max_abs_diff(cand, new)
                new = cand
                if diff <= _FP_TOL * (1.0 + _max_abs(new)):
                    break
            else:
                raise NoConvergence(_FP_MAX_SWEEPS, diff)
        ys.append(new)
    return ys


def lmm_residual_point(scheme, f, points, h):
    """Residual of the defining relation on M+1 consecutive points."""
    dims = len(points[0])
    res = []
    for d in range(dims):
        acc = 0.0
        for m, p in enumerate(points):
            acc = acc + scheme.alpha[m] * p[d] - h * scheme.beta[m] * f(p)[d]
        res.append(acc)
    return tuple(res)


# -- reference flow ------------------------------------------------------------

_REF_ORDER = 20
_MIN_STEP = 1e-12


def _taylor_step_size(coeffs, tol, remaining):
    """Step from the decay of the two highest Taylor coefficients."""
    hs = []
    for k in (_REF_ORDER - 1, _REF_ORDER):
        nk = _max_abs(coeffs[k])
        if nk > 0.0:
            hs.append((tol / nk) ** (1.0 / k))
    h = 0.8 * min(hs) if hs else remaining
    return min(h, remaining)


def _horner(coeffs, h):
    n = len(coeffs[0])
    out = []
    for i in range(n):
        acc = coeffs[-1][i]
        for k in range(len(coeffs) - 2, -1, -1):
            acc = acc * h + coeffs[k][i]
        out.append(acc)
    return tuple(out)


def reference_flow(f, x, t, tol=1e-13):
    """High-accuracy flow phi_t(x) by adaptive Taylor integration (order 20).

    Components of x may be floats or equal-length arrays (batched points
    share the step sequence).
    """
    y = tuple(x)
    remaining = float(t)
    direction = 1.0 if remaining >= 0 else -1.0
    remaining = abs(remaining)
    while remaining > 0.0:
        _, coeffs = flow_taylor_coeffs(f, y, _REF_ORDER)
        h = _taylor_step_size(coeffs, tol, remaining)
        if h < _MIN_STEP:
            raise StepUnderflow(f"required step {h:.3e} below 1e-12")
        y = _horner(coeffs, direction * h)
        remaining = 0.0 if h >= remaining else remaining - h
    return y


def reference_trajectory(f, x, times, tol=1e-13):
    """phi_t(x) on an increasing grid of times >= 0, with dense output.

    Returns an array of shape (len(times), N).  Inside each adaptive
    Taylor step the stored series is evaluated at every grid point it
    covers, so fine meshes cost almost nothing beyond the stepping.
    """
    times = np.asarray(times, dtype=float)
    n = len(x)
    out = np.empty((times.size, n))
    y = tuple(float(c) for c in x)
    t_cur = 0.0
    idx = 0
    while idx < times.size and times[idx] <= t_cur + 1e-15:
        out[idx] = y
        idx += 1
    t_end = float(times[-1])
    while idx < times.size:
        _, coeffs = flow_taylor_coeffs(f, y, _REF_ORDER)
        h = _taylor_step_size(coeffs, tol, t_end - t_cur)
        if h < _MIN_STEP:
            raise StepUnderflow(f"required step {h:.3e} below 1e-12")
        while idx < times.size and times[idx] <= t_cur + h + 1e-15:
            out[idx] = _horner(coeffs, times[idx] - t_cur)
            idx += 1
        y = _horner(coeffs, h)
        t_cur += h
    return out


def order_estimate(step_fn, suite, h):
    """Measured order p: mean log2 ratio of errors over one fixed span h,
    integrated once with step h and once with two steps of h/2.

    Both runs target the same reference state, so the ratio is 2^p for an
    order-p method.  `step_fn(f, x, h)` is the map under test; `suite` is
    a list of (field, point) pairs with smooth fields.
    """
    ratios = []
    for f, x in suite:
        exact = reference_flow(f, x, h)
        coarse = step_fn(f, x, h)
        fine = step_fn(f, step_fn(f, x, h / 2), h / 2)
        errs = (_max_abs_diff(coarse, exact), _max_abs_diff(fine, exact))
        if min(errs) < 1e-13:
            raise DegenerateError("errors at roundoff; enlarge h")
        ratios.append(math.log2(errs[0] / errs[1]))
    return sum(ratios) / len(ratios)
