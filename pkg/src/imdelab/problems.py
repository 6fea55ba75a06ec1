"""Benchmark dynamical systems and the non-uniqueness demonstrations.

Each problem packages the printed vector field (and Hamiltonian where one
exists) together with its default sampling domain, initial point and data
step.  The registry is immutable and safe for concurrent reads.
"""

import math
from dataclasses import dataclass, field as dc_field

from .fields import FieldExpr, Var, Param, Const, sin, cos
from .integrators import TABLEAUS, rk_step, reference_flow
from .errors import UnknownProblem, BadParams

__all__ = ["Problem", "problem", "list_problems",
           "nonuniqueness_flow_defect", "euler_reparameterization_results"]


@dataclass(frozen=True)
class Problem:
    name: str
    field: FieldExpr
    dim: int
    x0: tuple
    box: tuple               # ((lo, hi),) per dimension; default sampling domain
    data_step: float
    hamiltonian: FieldExpr = None
    flow_time: float = 4.0   # default trajectory length for flow datasets
    extra_boxes: dict = dc_field(default_factory=dict)
    params: dict = dc_field(default_factory=dict)
    equations: str = ""


def _pendulum(g=10.0, l=1.0):
    if l == 0.0:
        raise BadParams("pendulum needs l != 0")
    f = FieldExpr([-(Param("g") / Param("l")) * sin(Var(2)), Var(1)],
                  params={"g": float(g), "l": float(l)}, name="pendulum")
    H = FieldExpr([0.5 * Var(1) ** 2
                   - (Param("g") / Param("l")) * cos(Var(2))],
                  params={"g": float(g), "l": float(l)}, dim=2)
    return Problem(
        name="pendulum", field=f, dim=2, x0=(0.0, 1.0),
        box=((-3.8, 3.8), (-1.2, 1.2)), data_step=0.12, hamiltonian=H,
        flow_time=4.0, params={"g": float(g), "l": float(l)},
        equations="d/dt p = -(g/l) sin q ; d/dt q = p")


def _pendulum_hnn(g=1.0, l=1.0):
    base = _pendulum(g=g, l=l)
    space1 = ((-1.1, math.pi / 2), (-1.1, math.pi / 2))
    space2 = ((-math.pi / 2, 1.1), (-math.pi / 2, 1.1))
    return Problem(
        name="pendulum-hnn", field=base.field, dim=2, x0=(0.0, 1.0),
        box=space1, data_step=0.1, hamiltonian=base.hamiltonian,
        flow_time=4.0, extra_boxes={"space1": space1, "space2": space2},
        params={"g": float(g), "l": float(l)},
        equations="H(p,q) = p^2/2 - (g/l) cos q")


def _damped_oscillator():
    f = FieldExpr([Const(-0.1) * Var(1) ** 3 + Const(2.0) * Var(2) ** 3,
                   Const(-2.0) * Var(1) ** 3 + Const(-0.1) * Var(2) ** 3],
                  name="damped-oscillator")
    return Problem(
        name="damped-oscillator", field=f, dim=2, x0=(2.0, 0.0),
        box=((-2.2, 2.2), (-2.2, 2.0)), data_step=0.04,
        flow_time=10.0,
        equations="d/dt p = -0.1 p^3 + 2.0 q^3 ; d/dt q = -2.0 p^3 - 0.1 q^3")


def _lorenz():
    f = FieldExpr([Const(10.0) * (Var(2) - Var(1)),
                   Var(1) * (Const(28.0) - Const(10.0) * Var(3)) - Var(2),
                   Const(10.0) * Var(1) * Var(2) - (Const(8.0) / Const(3.0)) * Var(3)],
                  name="lorenz")
    return Problem(
        name="lorenz", field=f, dim=3, x0=(-0.8, 0.7, 2.6),
        box=((-2.0, 2.0), (-3.0, 3.0), (0.0, 5.0)), data_step=0.04,
        flow_time=10.0,
        equations=("d/dt p = 10 (q - p) ; d/dt q = p (28 - 10 r) - q ; "
                   "d/dt r = 10 p q - 8/3 r"))


def _linear(lam=1.0):
    f = FieldExpr([Param("lam") * Var(1)], params={"lam": float(lam)},
                  name="linear")
    return Problem(
        name="linear", field=f, dim=1, x0=(1.0,),
        box=((-2.0, 2.0),), data_step=0.1, flow_time=1.0,
        params={"lam": float(lam)}, equations="d/dt y = lam y")


def _nonuniq_ab(a=1.0, b=0.0):
    if a == 0.0:
        raise BadParams("nonuniq-ab needs a != 0")
    f = FieldExpr([Param("a"), sin(Var(1) + Param("b"))],
                  params={"a": float(a), "b": float(b)}, name="nonuniq-ab")
    return Problem(
        name="nonuniq-ab", field=f, dim=2, x0=(0.0, 0.0),
        box=((-1.0, 1.0), (-1.0, 1.0)), data_step=0.1,
        flow_time=2 * math.pi / abs(a), params={"a": float(a), "b": float(b)},
        equations="d/dt p = a ; d/dt q = sin(p + b)")


_BUILDERS = {
    "pendulum": _pendulum,
    "pendulum-hnn": _pendulum_hnn,
    "damped-oscillator": _damped_oscillator,
    "lorenz": _lorenz,
    "linear": _linear,
    "nonuniq-ab": _nonuniq_ab,
}


def problem(name, **params):
    """Build a named benchmark problem, overriding declared parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; "
                             f"choices: {sorted(_BUILDERS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise BadParams(str(exc)) from None


def list_problems():
    """Name, defaults and defining equations for every registered problem."""
    rows = []
    for name in sorted(_BUILDERS):
        p = _BUILDERS[name]()
        rows.append({
            "name": name,
            "dim": p.dim,
            "x0": p.x0,
            "box": p.box,
            "data_step": p.data_step,
            "hamiltonian": p.hamiltonian is not None,
            "equations": p.equations,
        })
    return rows


# -- non-uniqueness demonstrations ---------------------------------------------

def nonuniqueness_flow_defect(a, b, x0=(0.3, -0.4), tol=1e-13):
    """|phi_{2 pi / a}(x0) - (p0 + 2 pi, q0)| for the (a, b) system.

    The flow over one period shifts p by 2 pi and returns q exactly,
    independently of b: distinct fields share the same flow samples.
    """
    prob = problem("nonuniq-ab", a=a, b=b)
    end = reference_flow(prob.field, x0, 2 * math.pi / a, tol=tol)
    return max(abs(end[0] - (x0[0] + 2 * math.pi)), abs(end[1] - x0[1]))


def euler_reparameterization_results(lam, h, x0, steps=2):
    """Explicit-Euler trajectories for lam and for -2/h - lam coincide.

    Returns the pair of end states after `steps` Euler steps.
    """
    tab = TABLEAUS["euler"]
    out = []
    for l in (lam, -2.0 / h - lam):
        f = problem("linear", lam=l).field
        y = (float(x0),)
        for _ in range(steps):
            y = rk_step(tab, f, y, h)
        out.append(y[0])
    return tuple(out)
