"""Inverse modified differential equations (IMDE).

For a one-step method Phi_h and a field f, the IMDE is the perturbed field
f_h = f_0 + h f_1 + h^2 f_2 + ... whose numerical solution reproduces the
exact flow of f:  Phi_{h, f_h}(x) = phi_{h, f}(x) as a series in h.  The
coefficient functions are computed here with no symbolic machinery: both
sides are expanded in a jet in h and the recursion

    f_k = [h^{k+1}] ( phi_{h,f}(x) - Phi_{h, f_h^{k-1}}(x) )

is read off coefficient by coefficient.  The method map only has to be
evaluable over jets, so Runge-Kutta maps, the symplectic Euler map and
S-fold compositions all go through the same engine.

Closed-form truncations for the four classic methods are transcribed
separately and serve as oracles for the generic path, and the multistep
recursion built from Lie derivatives covers linear multistep schemes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .jets import Jet, fresh_var, jet_coeff
from .flows import (flow_taylor_coeffs, lie_derivative, directional,
                    gradient, jacobian, hessian_bilinear)
from .integrators import (RungeKuttaMethod, ComposedMethod, ButcherTableau,
                          method_by_name, reference_flow, _scalar_fn)
from .errors import UnknownMethodId, OddDimension, UnsupportedMethod

__all__ = ["imde_coefficient", "ImdeField", "imde_truncated_eval",
           "lmm_imde_coefficient", "lmm_truncated_eval", "lmm_relation_residual",
           "closed_form_imde", "closed_form_field",
           "hamiltonian_truncation", "hamiltonian_truncation_field",
           "composition_invariance_defect", "hamiltonicity_defect",
           "TruncationDiagnostics", "truncation_diagnostics"]


def _as_method(method):
    if isinstance(method, str):
        return method_by_name(method)
    if isinstance(method, ButcherTableau):
        return RungeKuttaMethod(method)
    if hasattr(method, "step"):
        return method
    raise UnsupportedMethod(f"cannot interpret {method!r} as a one-step map")


def imde_coefficient(method, f, x, k):
    """Coefficient field f_k of the IMDE of `method` for `f`, at point x.

    x may live in any scalar algebra; the recursion evaluates the lower
    coefficient fields at jet-perturbed points as needed.
    """
    method = _as_method(method)
    if k == 0:
        return tuple(f(x))
    var = fresh_var()
    hj = Jet(var, (0.0, 1.0) + (0.0,) * k)  # the step as a jet of order k+1
    _, flow = flow_taylor_coeffs(f, x, k + 1)

    def truncated_field(y):
        vals = list(f(y))
        hp = hj
        for j in range(1, k):
            cj = imde_coefficient(method, f, y, j)
            for i, c in enumerate(cj):
                vals[i] = vals[i] + hp * c
            hp = hp * hj
        return tuple(vals)

    numeric = method.step(truncated_field, tuple(x), hj)
    return tuple(flow[k + 1][i] - jet_coeff(numeric[i], var, k + 1)
                 for i in range(len(x)))


class ImdeField:
    """Lazily computed IMDE coefficients and truncations for (method, f).

    Coefficient evaluations at plain-number points are memoized per
    (point, k); jet- or array-valued points bypass the cache.  Instances
    are safe for concurrent readers: the cache is only ever appended to
    and every computation is pure.
    """

    def __init__(self, f, method, K=3):
        self.f = f
        self.method = _as_method(method)
        self.K = K
        self._cache = {}

    def _key(self, x, k):
        try:
            return (k,) + tuple(float(c) for c in x)
        except (TypeError, ValueError):
            return None

    def coefficient(self, x, k):
        key = self._key(x, k)
        if key is not None and key in self._cache:
            return self._cache[key]
        val = imde_coefficient(self.method, self.f, x, k)
        if key is not None:
            self._cache[key] = val
        return val

    def truncated(self, x, h, K=None):
        """Horner evaluation of f_h^K(x) = sum_{k<=K} h^k f_k(x)."""
        K = self.K if K is None else K
        acc = self.coefficient(x, K)
        for k in range(K - 1, -1, -1):
            ck = self.coefficient(x, k)
            acc = tuple(c + h * a for c, a in zip(ck, acc))
        return acc

    def truncated_field(self, h, K=None):
        """The truncation as a plain callable field y -> f_h^K(y)."""
        return lambda y: self.truncated(y, h, K)


def imde_truncated_eval(imde, x, h):
    return imde.truncated(x, h)


# -- linear multistep ----------------------------------------------------------

def lmm_imde_coefficient(scheme, f, x, k):
    """IMDE coefficient of a weakly stable consistent multistep scheme:

        f_k = [ sum_m alpha_m m^{k+1}/(k+1)! D^k f
                - sum_m beta_m sum_{j=1..k} m^j/j! D^j f_{k-j} ] / sum_m beta_m
    """
    scheme.require_weakly_stable()
    scheme.require_consistent()
    if k == 0:
        return tuple(f(x))
    sb = sum(scheme.beta)
    w = sum(a * m ** (k + 1) for m, a in enumerate(scheme.alpha)) \
        / math.factorial(k + 1)
    dkf = lie_derivative(f, f, x, k)
    total = [w * c for c in dkf]
    for j in range(1, k + 1):
        wj = sum(b * m ** j for m, b in enumerate(scheme.beta)) / math.factorial(j)
        if wj == 0.0:
            continue
        lower = lambda y, jj=k - j: lmm_imde_coefficient(scheme, f, y, jj)
        dj = lie_derivative(f, lower, x, j)
        total = [t - wj * c for t, c in zip(total, dj)]
    return tuple(t / sb for t in total)


def lmm_truncated_eval(scheme, f, x, h, K):
    acc = lmm_imde_coefficient(scheme, f, x, K)
    for k in range(K - 1, -1, -1):
        ck = lmm_imde_coefficient(scheme, f, x, k)
        acc = tuple(c + h * a for c, a in zip(ck, acc))
    return acc


def lmm_relation_residual(scheme, f, x, h, K, tol=1e-13):
    """Defect of the multistep relation with the truncated IMDE substituted:

        sum_m alpha_m phi_{mh}(x) - h sum_m beta_m f_h^K(phi_{mh}(x)),

    which shrinks as O(h^{K+2}) along exact flows.
    """
    pts = [tuple(x)] + [reference_flow(f, x, m * h, tol=tol)
                        for m in range(1, scheme.steps + 1)]
    dims = len(x)
    res = [0.0] * dims
    for m, p in enumerate(pts):
        fh = lmm_truncated_eval(scheme, f, p, h, K)
        for d in range(dims):
            res[d] += scheme.alpha[m] * p[d] - h * scheme.beta[m] * fh[d]
    return tuple(res)


# -- closed-form truncations ----------------------------------------------------

def _vadd(*terms):
    out = terms[0]
    for t in terms[1:]:
        out = tuple(a + b for a, b in zip(out, t))
    return out


def _vscale(s, v):
    return tuple(s * c for c in v)


def _elementary_differentials(f, x):
    """The eight tensor contractions entering the order-3 truncations."""
    d = directional(f, x, f(x), 3)
    A = d[0]                                  # f
    B = d[1]                                  # f'f
    C = _vscale(2.0, d[2])                    # f''(f,f)
    T3 = _vscale(6.0, d[3])                   # f'''(f,f,f)
    D = directional(f, x, B, 1)[1]            # f'f'f
    f2BB = _vscale(2.0, directional(f, x, B, 2)[2])
    AB = _vadd(A, B)
    f2ABAB = _vscale(2.0, directional(f, x, AB, 2)[2])
    # polarization: f''(u,v) = (f''(u+v,u+v) - f''(u,u) - f''(v,v)) / 2
    E2 = tuple(0.5 * (ab - aa - bb)
               for ab, aa, bb in zip(f2ABAB, C, f2BB))  # f''(f'f, f)
    F = directional(f, x, C, 1)[1]            # f' f''(f,f)
    G = directional(f, x, D, 1)[1]            # f'f'f'f
    return A, B, C, T3, D, E2, F, G


def _euler_truncation(f, x, h, sign):
    A, B, C, T3, D, E2, F, G = _elementary_differentials(f, x)
    h2 = h * h
    h3 = h2 * h
    out = []
    for i in range(len(A)):
        third = T3[i] / 24 + E2[i] / 8 + F[i] / 24 + G[i] / 24
        out.append(A[i] + sign * (h / 2) * B[i]
                   + (h2 / 6) * (C[i] + D[i])
                   + sign * h3 * third)
    return tuple(out)


def _midpoint_truncation(f, x, h):
    A, B, C, T3, D, E2, F, G = _elementary_differentials(f, x)
    h2 = h * h
    h3 = h2 * h
    return tuple(A[i] + (h2 / 6) * D[i] + (h2 / 24) * C[i]
                 - (h3 / 16) * F[i] - (h3 / 8) * G[i]
                 for i in range(len(A)))


def hamiltonian_truncation(H, x, h):
    """Order-2 truncated IMDE Hamiltonian of the symplectic Euler map:

        H + h/2 H_p.H_q + h^2/6 [H_pp(H_q,H_q) + H_pq(H_p,H_q) + H_qq(H_p,H_p)]
    """
    if len(x) % 2:
        raise OddDimension("Hamiltonian truncation needs even dimension")
    hfun = _scalar_fn(H)
    n = len(x) // 2
    g = gradient(hfun, x)
    hp, hq = g[:n], g[n:]
    zero = tuple(0.0 for _ in range(n))
    dp = lambda v: tuple(v) + zero
    dq = lambda v: zero + tuple(v)
    t1 = None
    for a, b in zip(hp, hq):
        t1 = a * b if t1 is None else t1 + a * b
    hpp = hessian_bilinear(hfun, x, dp(hq), dp(hq))
    hpq = hessian_bilinear(hfun, x, dp(hp), dq(hq))
    hqq = hessian_bilinear(hfun, x, dq(hp), dq(hp))
    return hfun(x) + (h / 2) * t1 + (h * h / 6) * (hpp + hpq + hqq)


def hamiltonian_truncation_field(H, x, h):
    """J^{-1} grad of the truncated Hamiltonian, by nested differentiation."""
    n = len(x) // 2
    g = gradient(lambda y: hamiltonian_truncation(H, y, h), x)
    return tuple(-c for c in g[n:]) + tuple(g[:n])


def closed_form_imde(method_id, f_or_h, x, h):
    """Printed truncations: order-3 fields for euler / implicit-euler /
    midpoint, the order-2 Hamiltonian for symplectic-euler."""
    if method_id == "euler":
        return _euler_truncation(f_or_h, x, h, +1.0)
    if method_id == "implicit-euler":
        return _euler_truncation(f_or_h, x, h, -1.0)
    if method_id in ("midpoint", "explicit-midpoint"):
        return _midpoint_truncation(f_or_h, x, h)
    if method_id == "symplectic-euler":
        return hamiltonian_truncation(f_or_h, x, h)
    raise UnknownMethodId(f"no closed-form truncation for {method_id!r}")


def closed_form_field(method_id, f_or_h, x, h):
    """Like closed_form_imde but always a vector field (symplectic Euler's
    Hamiltonian is pushed through J^{-1} grad)."""
    if method_id == "symplectic-euler":
        return hamiltonian_truncation_field(f_or_h, x, h)
    return closed_form_imde(method_id, f_or_h, x, h)


# -- structural checks -----------------------------------------------------------

def composition_invariance_defect(method, f, x, k, s_list):
    """Max deviation of S^k * (k-th coefficient of the S-fold composition,
    expanded in its own step S*h) from the base-method coefficient f_k."""
    method = _as_method(method)
    base = imde_coefficient(method, f, x, k)
    worst = 0.0
    for s in s_list:
        if s == 1:
            cand = base
        else:
            comp = imde_coefficient(ComposedMethod(method, s), f, x, k)
            cand = _vscale(float(s) ** k, comp)
        d = max(float(np.max(np.abs(np.asarray(a - b))))
                for a, b in zip(cand, base))
        worst = max(worst, d)
    return worst


def hamiltonicity_defect(g, samples):
    """max over samples of || J g'(x) - (J g'(x))^T ||_max.

    Zero (to roundoff) iff g is locally a Hamiltonian vector field.
    """
    worst = 0.0
    for x in samples:
        if len(x) % 2:
            raise OddDimension("hamiltonicity check needs even dimension")
        n = len(x) // 2
        jac = jacobian(g, x)
        a = [list(jac[n + i]) for i in range(n)] + \
            [[-c for c in jac[i]] for i in range(n)]
        for i in range(2 * n):
            for j in range(i + 1, 2 * n):
                worst = max(worst, abs(float(a[i][j]) - float(a[j][i])))
    return worst


# -- truncation-index diagnostics -------------------------------------------------

@dataclass(frozen=True)
class TruncationDiagnostics:
    """Constructive constants of the truncation analysis.

    mu, kappa, h0 come from the contraction bounds of the method map
    (h0 = r/(4 kappa m), infinite for kappa = 0); eta, zeta, q feed the
    truncation-index selector.  `k_statement` uses eta*r as printed in the
    statement, `k_proof` the b1*r variant appearing in the proof; both are
    recorded without choosing between them.  `k_of_h` is the statement
    value floored at p-1, with `no_k_at_least_p` set when the inequality
    admits no K >= p.
    """

    mu: float
    kappa: float
    h0: float
    b1: float
    b2: float
    eta: float
    zeta: float
    q: float
    k_statement: int
    k_proof: float
    k_of_h: int
    no_k_at_least_p: bool


def _largest_k(zeta, q, h, m, scale, p):
    """Largest integer K with zeta*(K-p+2)^q * h * m / scale <= e^-q.

    Arguments with K - p + 2 <= 0 satisfy the inequality trivially, so the
    result is never below p - 2.
    """
    def ok(k):
        base = k - p + 2
        if base <= 0:
            return True
        return zeta * base ** q * h * m / scale <= math.exp(-q)

    root = (scale * math.exp(-q) / (zeta * h * m)) ** (1.0 / q)
    k = p - 2 + max(0, math.floor(root))
    while ok(k + 1):
        k += 1
    while not ok(k):
        k -= 1
    return k


def truncation_diagnostics(tab, m, r, h, p=None):
    """Diagnostic constants and truncation-index selection for a tableau."""
    if p is None:
        p = tab.order
    mu = sum(abs(b) for b in tab.b)
    kappa = max(sum(abs(x) for x in row) for row in tab.a)
    h0 = math.inf if kappa == 0.0 else r / (4.0 * kappa * m)
    b1 = math.inf if kappa == 0.0 else 1.0 / (4.0 * kappa)
    b2 = 2.0 * mu
    eta = max(6.0, (b2 + 1.0) / 29.0 + 1.0)
    zeta = 10.0 * (eta - 1.0)
    q = -math.log(2.0 * b2) / math.log(0.912)
    k_statement = _largest_k(zeta, q, h, m, eta * r, p)
    if math.isinf(b1):
        k_proof = math.inf
    else:
        k_proof = _largest_k(zeta, q, h, m, b1 * r, p)
    flag = k_statement < p
    return TruncationDiagnostics(
        mu=mu, kappa=kappa, h0=h0, b1=b1, b2=b2, eta=eta, zeta=zeta, q=q,
        k_statement=k_statement, k_proof=k_proof,
        k_of_h=max(k_statement, p - 1), no_k_at_least_p=flag)
