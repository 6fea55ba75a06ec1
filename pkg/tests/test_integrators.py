"""One-step maps, multistep recurrences and the reference flow."""

import math

import numpy as np
import pytest

from imdelab.fields import parse_field
from imdelab.integrators import (TABLEAUS, LMM_SCHEMES, ButcherTableau,
                                 LmmScheme, SolverSpec, rk_step, ode_solve,
                                 symplectic_euler_step, lmm_trajectory,
                                 lmm_residual_point, reference_flow,
                                 reference_trajectory, order_estimate,
                                 RungeKuttaMethod)
from imdelab.problems import problem
from imdelab.errors import (NoConvergence, DegenerateError, NotWeaklyStable,
                            NotConsistent, StepUnderflow)

from helpers import fd_jacobian, vec_diff, random_points

LIN = problem("linear").field
PEND = problem("pendulum").field
PEND1 = problem("pendulum", g=1.0).field
H_PEND = problem("pendulum-hnn").hamiltonian
LORENZ = problem("lorenz").field


def test_tableau_invariants():
    for tab in set(TABLEAUS.values()):
        assert abs(sum(tab.b) - 1.0) <= 1e-12
        for i, row in enumerate(tab.a):
            assert abs(tab.c[i] - sum(row)) <= 1e-12
    assert TABLEAUS["euler"].explicit
    assert not TABLEAUS["implicit-euler"].explicit
    with pytest.raises(ValueError):
        ButcherTableau("bad", a=((0.0,),), b=(0.5,), order=1)


def test_rk_step_classic_values():
    assert abs(rk_step(TABLEAUS["euler"], LIN, (1.0,), 0.1)[0] - 1.1) <= 1e-15
    assert abs(rk_step(TABLEAUS["explicit-midpoint"], LIN, (1.0,), 0.1)[0]
               - 1.105) <= 1e-15
    assert abs(rk_step(TABLEAUS["implicit-euler"], LIN, (1.0,), 0.1)[0]
               - 1.0 / 0.9) <= 1e-13


def test_implicit_step_no_convergence_for_large_h():
    with pytest.raises(NoConvergence):
        rk_step(TABLEAUS["implicit-euler"], LIN, (1.0,), 2.0)


def test_ode_solve_composition():
    spec = SolverSpec("euler", 0.1, 2)
    assert abs(ode_solve(spec, LIN, (1.0,))[0] - 1.21) <= 1e-14
    one = SolverSpec("euler", 0.1, 1)
    assert ode_solve(one, LIN, (1.0,)) == rk_step(TABLEAUS["euler"], LIN,
                                                  (1.0,), 0.1)


def test_ode_solve_composition_associativity_bitwise():
    x = (0.3, 0.8)
    s4 = ode_solve(SolverSpec("explicit-midpoint", 0.05, 4), PEND, x)
    s2 = SolverSpec("explicit-midpoint", 0.05, 2)
    twice = ode_solve(s2, PEND, ode_solve(s2, PEND, x))
    assert s4 == twice


def test_midpoint_refinement_both_near_reference():
    x = (0.0, 1.0)
    ref = reference_flow(PEND, x, 0.1)
    a = ode_solve(SolverSpec("explicit-midpoint", 0.05, 2), PEND, x)
    b = ode_solve(SolverSpec("explicit-midpoint", 0.1, 1), PEND, x)
    assert a != b
    # O(h^3) span error; the pendulum's third derivatives are O(10)
    assert vec_diff(a, ref) <= 50 * 0.05 ** 3
    assert vec_diff(b, ref) <= 50 * 0.1 ** 3


def test_one_step_consistency_all_tableaus():
    # Phi_h - (y + h f(y)) = O(h^2): halving h quarters the defect
    y = (0.4, 0.9)
    f = PEND
    for tab in set(TABLEAUS.values()):
        def defect(h):
            stepped = rk_step(tab, f, y, h)
            euler = tuple(a + h * b for a, b in zip(y, f(y)))
            return max(vec_diff(stepped, euler), 1e-300)
        d1, d2 = defect(0.02), defect(0.01)
        if d1 > 1e-13:
            assert d1 / d2 >= 3.5


def test_symplectic_euler_separable_pendulum():
    out = symplectic_euler_step(H_PEND, (0.0, 1.0), 0.1)
    pbar = -0.1 * math.sin(1.0)
    assert vec_diff(out, (pbar, 1.0 + 0.1 * pbar)) <= 1e-14
    ident = symplectic_euler_step(H_PEND, (0.3, 0.7), 0.0)
    assert vec_diff(ident, (0.3, 0.7)) == 0.0


def test_symplectic_euler_map_is_symplectic_fd_oracle():
    # finite-difference Jacobian oracle: G'(x)^T J G'(x) = J
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    step = lambda y: symplectic_euler_step(H_PEND, y, 0.1)
    jac = fd_jacobian(step, (0.0, 1.0))
    assert np.abs(jac.T @ J @ jac - J).max() <= 1e-10
    for row in random_points(((-2.0, 2.0), (-2.0, 2.0)), 20, seed=11):
        jac = fd_jacobian(step, tuple(row))
        assert np.abs(jac.T @ J @ jac - J).max() <= 1e-9


def test_lmm_scheme_validators():
    with pytest.raises(ValueError):
        LmmScheme("bad", alpha=(1.0, 0.0), beta=(1.0, 1.0))
    # sum(m*alpha) = 2 but sum(beta) = 1: violates consistency
    bad_beta = LmmScheme("bad-beta", alpha=(-1.0, 0.0, 1.0),
                         beta=(0.0, 1.0, 0.0))
    with pytest.raises(NotConsistent):
        bad_beta.require_consistent()
    unstable = LmmScheme("unstable", alpha=(1.0, -2.0, 1.0),
                         beta=(0.0, 0.0, 1.0))
    with pytest.raises(NotWeaklyStable):
        unstable.require_weakly_stable()
    for s in LMM_SCHEMES.values():
        s.require_weakly_stable()
        s.require_consistent()


def test_ab2_one_step_hand_value():
    # y2 = y1 + h (3/2 f(y1) - 1/2 f(y0)) on f=y with exact startup
    h = 0.1
    y1 = math.exp(h)
    expect = y1 + h * (1.5 * y1 - 0.5 * 1.0)
    traj = lmm_trajectory(LMM_SCHEMES["ab2"], LIN, [(1.0,), (y1,)], h, 1)
    assert abs(traj[-1][0] - expect) <= 1e-14
    assert abs(expect - 1.2209465557869947) <= 1e-13


def test_lmm_zero_steps_returns_startup():
    start = [(1.0,), (2.0,)]
    traj = lmm_trajectory(LMM_SCHEMES["ab2"], LIN, start, 0.1, 0)
    assert traj == start


@pytest.mark.parametrize("name", ["ab2", "ab3", "trapezoidal",
                                  "implicit-euler"])
def test_lmm_emitted_points_satisfy_relation(name):
    scheme = LMM_SCHEMES[name]
    h = 0.05
    start = [reference_flow(PEND, (0.0, 1.0), m * h)
             for m in range(scheme.steps)]
    traj = lmm_trajectory(scheme, PEND, start, h, 6)
    for i in range(len(traj) - scheme.steps):
        window = traj[i:i + scheme.steps + 1]
        res = lmm_residual_point(scheme, PEND, window, h)
        scale = max(1.0, max(abs(c) for p in window for c in p))
        assert max(abs(r) for r in res) <= 1e-12 * scale


def test_ab2_global_order_two_on_linear():
    scheme = LMM_SCHEMES["ab2"]

    def global_err(h):
        n = int(round(1.0 / h))
        start = [(1.0,), (math.exp(h),)]
        traj = lmm_trajectory(scheme, LIN, start, h, n - 1)
        return abs(traj[-1][0] - math.e)

    order = math.log2(global_err(0.02) / global_err(0.01))
    assert 1.8 <= order <= 2.2


def test_reference_flow_examples():
    assert abs(reference_flow(LIN, (1.0,), 1.0)[0] - math.e) <= 1e-12
    assert reference_flow(PEND, (0.3, 0.7), 0.0) == (0.3, 0.7)
    x = (-0.8, 0.7, 2.6)
    a = reference_flow(LORENZ, x, 1.0)
    b = reference_flow(LORENZ, reference_flow(LORENZ, x, 0.5), 0.5)
    assert vec_diff(a, b) <= 1e-9


def test_reference_trajectory_dense_output_matches_flow():
    times = np.linspace(0.0, 2.0, 41)
    traj = reference_trajectory(PEND, (0.0, 1.0), times)
    for t, row in [(times[7], traj[7]), (times[-1], traj[-1])]:
        ref = reference_flow(PEND, (0.0, 1.0), float(t))
        assert vec_diff(tuple(row), ref) <= 1e-11


def test_reference_flow_step_underflow():
    blowup = parse_field("pow y1 2")
    with pytest.raises(StepUnderflow):
        reference_flow(blowup, (1.0,), 5.0)  # solution escapes at t=1


def test_order_estimates_match_declared_orders():
    suite = [(LIN, (1.0,)), (PEND, (0.3, 0.8))]
    euler = order_estimate(RungeKuttaMethod(TABLEAUS["euler"]).step, suite, 0.05)
    assert abs(euler - 1.0) <= 0.1
    mid = order_estimate(RungeKuttaMethod(TABLEAUS["explicit-midpoint"]).step,
                         suite, 0.05)
    assert abs(mid - 2.0) <= 0.1
    se = order_estimate(lambda f, x, h: symplectic_euler_step(H_PEND, x, h),
                        [(PEND1, (0.3, 0.8))], 0.05)
    assert abs(se - 1.0) <= 0.1
    with pytest.raises(DegenerateError):
        order_estimate(RungeKuttaMethod(TABLEAUS["rk4"]).step,
                       [(LIN, (1.0,))], 1e-4)
