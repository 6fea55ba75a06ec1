"""Datasets, training objectives, the loop, and error metrics."""

import math

import numpy as np
import pytest

from imdelab.discovery import (make_dataset, Dataset, odenet_loss, lmnet_loss,
                               hnn_symplectic_euler_loss, train, TrainConfig,
                               FlowProbe, DomainProbe,
                               error_metric, convergence_order, as_array_field)
from imdelab.integrators import (SolverSpec, LMM_SCHEMES, lmm_trajectory,
                                 reference_flow, symplectic_euler_step,
                                 TABLEAUS, rk_step)
from imdelab.imde import closed_form_field
from imdelab.nn import Mlp, LrSchedule
from imdelab.problems import problem
from imdelab.errors import NonFiniteLoss, NonPositiveError

from helpers import vec_diff

LIN = problem("linear").field
PEND = problem("pendulum").field
H1 = problem("pendulum-hnn").hamiltonian


def test_flow_dataset_single_pair_and_chaining():
    ds = make_dataset(LIN, "flow", 0.1, 1, x0=(1.0,))
    assert len(ds) == 1
    assert abs(ds.ys[0, 0] - math.exp(0.1)) <= 1e-12
    ds33 = make_dataset(PEND, "flow", 0.12, 33, x0=(0.0, 1.0))
    assert len(ds33) == 33
    assert np.array_equal(ds33.xs[1:], ds33.ys[:-1])
    assert ds33.trajectory.shape == (34, 2)
    # covers t in [0, 4]
    assert 33 * 0.12 == pytest.approx(3.96)
    end = reference_flow(PEND, (0.0, 1.0), 33 * 0.12)
    assert vec_diff(tuple(ds33.ys[-1]), end) <= 1e-9


def test_domain_dataset_deterministic_and_inside_box():
    box = problem("damped-oscillator").box
    a = make_dataset(problem("damped-oscillator").field, "domain", 0.04, 200,
                     box=box, seed=5)
    b = make_dataset(problem("damped-oscillator").field, "domain", 0.04, 200,
                     box=box, seed=5)
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    assert a.xs[:, 0].min() >= box[0][0] and a.xs[:, 0].max() <= box[0][1]
    assert a.xs[:, 1].min() >= box[1][0] and a.xs[:, 1].max() <= box[1][1]


def test_odenet_loss_zero_when_targets_from_same_solver():
    spec = SolverSpec("euler", 0.1, 2)
    f = as_array_field(LIN)
    xs = np.array([[1.0], [1.5], [-0.3]])
    y = xs
    for _ in range(spec.s):
        y = rk_step(TABLEAUS["euler"], f, y, spec.h)
    loss = odenet_loss(f, spec, xs, y)
    assert float(loss) == 0.0


def test_odenet_loss_zero_field_hand_value():
    # net == 0 leaves x unchanged; target is e^0.1: loss = (e^0.1 - 1)^2
    zero = lambda y: y * 0.0
    spec = SolverSpec("euler", 0.1, 1)
    xs = np.array([[1.0]])
    ys = np.array([[math.exp(0.1)]])
    loss = float(odenet_loss(zero, spec, xs, ys))
    assert abs(loss - (math.exp(0.1) - 1.0) ** 2) <= 1e-15
    assert abs(loss - 0.011060923) <= 1e-8


def test_odenet_loss_permutation_invariant():
    rng = np.random.default_rng(0)
    xs = rng.normal(size=(6, 2))
    ys = rng.normal(size=(6, 2))
    f = as_array_field(PEND)
    spec = SolverSpec("euler", 0.05, 2)
    base = float(odenet_loss(f, spec, xs, ys))
    perm = rng.permutation(6)
    assert abs(float(odenet_loss(f, spec, xs[perm], ys[perm])) - base) <= 1e-12


def test_lmnet_loss_zero_on_consistent_trajectory():
    scheme = LMM_SCHEMES["ab2"]
    h = 0.05
    start = [reference_flow(PEND, (0.0, 1.0), m * h) for m in range(2)]
    traj = np.array(lmm_trajectory(scheme, PEND, start, h, 10))
    loss = float(lmnet_loss(as_array_field(PEND), scheme, traj, h))
    assert loss <= 1e-20


def test_lmnet_loss_implicit_euler_structure():
    # single-step scheme: residual is |(y1-y0)/h - net(y1)|^2 summed
    scheme = LMM_SCHEMES["implicit-euler"]
    h = 0.1
    traj = np.array([[1.0], [1.2], [1.5]])
    f = as_array_field(LIN)
    expect = sum((((traj[i + 1, 0] - traj[i, 0]) / h) - traj[i + 1, 0]) ** 2
                 for i in range(2))
    assert abs(float(lmnet_loss(f, scheme, traj, h)) - expect) <= 1e-12


def test_lmnet_loss_additive_in_windows():
    scheme = LMM_SCHEMES["ab2"]
    h = 0.05
    start = [reference_flow(LIN, (1.0,), m * h) for m in range(2)]
    traj = np.array(lmm_trajectory(scheme, LIN, start, h, 8))
    f = as_array_field(problem("linear", lam=0.5).field)
    full = float(lmnet_loss(f, scheme, traj, h))
    parts = sum(float(lmnet_loss(f, scheme, traj[i:i + 3], h))
                for i in range(len(traj) - 2))
    assert abs(full - parts) <= 1e-10 * max(1.0, full)


def test_hnn_se_loss_zero_for_true_hamiltonian():
    rng = np.random.default_rng(1)
    xs = rng.uniform(-1.0, 1.0, size=(50, 2))
    ys = np.stack(symplectic_euler_step(H1, (xs[:, 0], xs[:, 1]), 0.1), axis=1)
    loss = hnn_symplectic_euler_loss(H1, xs, ys, 0.1)
    assert loss <= 1e-20


def test_hnn_se_loss_zero_function_reduces_to_pair_distance():
    rng = np.random.default_rng(2)
    xs = rng.normal(size=(20, 2))
    ys = rng.normal(size=(20, 2))
    net = Mlp.init((2, 4, 1), "tanh", seed=0)
    for w in net.weights:
        w[:] = 0.0
    loss = hnn_symplectic_euler_loss(net, xs, ys, 0.1)
    expect = float(((xs - ys) ** 2).sum() / 20)
    assert abs(float(loss.item()) - expect) <= 1e-12


def test_train_zero_updates_returns_initialized_net():
    data = make_dataset(LIN, "flow", 0.1, 5, x0=(1.0,))
    cfg = TrainConfig(model="odenet", widths=(1, 4, 1), activation="tanh",
                      schedule=LrSchedule("constant", 1e-3, 1e-3, 1),
                      updates=0, batch=0, seed=77, method="euler", h=0.1, s=1)
    net, curve, _ = train(cfg, data)
    fresh = Mlp.init((1, 4, 1), "tanh", seed=77)
    for a, b in zip(net.param_arrays(), fresh.param_arrays()):
        assert np.array_equal(a, b)
    assert len(curve) == 1


def test_train_smoke_curve_finite_and_min_nonincreasing():
    data = make_dataset(LIN, "flow", 0.1, 20, x0=(1.0,))
    cfg = TrainConfig(model="odenet", widths=(1, 8, 1), activation="tanh",
                      schedule=LrSchedule("exp-decay", 1e-2, 1e-4, 400),
                      updates=400, batch=0, seed=1, method="euler", h=0.05,
                      s=2, record_every=50)
    net, curve, _ = train(cfg, data)
    losses = [v for _, v in curve]
    assert all(math.isfinite(v) for v in losses)
    run_min = np.minimum.accumulate(losses)
    assert all(a <= b + 1e-18 for a, b in zip(run_min[1:], run_min[:-1]))
    assert losses[-1] < losses[0]


def test_train_aborts_on_nonfinite_loss():
    data = make_dataset(LIN, "flow", 0.1, 5, x0=(1.0,))
    data.ys[0, 0] = math.nan
    cfg = TrainConfig(model="odenet", widths=(1, 4, 1), activation="tanh",
                      schedule=LrSchedule("constant", 1e-3, 1e-3, 10),
                      updates=10, batch=0, seed=0, method="euler", h=0.1, s=1)
    with pytest.raises(NonFiniteLoss):
        train(cfg, data)


def test_error_metric_identity_is_zero():
    probe = DomainProbe(problem("damped-oscillator").box, samples=2000, seed=0)
    assert error_metric(PEND, PEND, probe) == 0.0
    fprobe = FlowProbe(PEND, (0.0, 1.0), 1.0, mesh_per_unit=500)
    assert error_metric(PEND, PEND, fprobe) == 0.0


def test_error_metric_constant_difference_matches_volume():
    box = ((-1.0, 1.0), (0.0, 2.0))
    c = (0.3, -0.7)
    g = lambda y: (y[0], y[1])
    gh = lambda y: (y[0] + c[0], y[1] + c[1])
    probe = DomainProbe(box, samples=100000, seed=3)
    expect = 4.0 * max(abs(v) for v in c)
    assert abs(error_metric(g, gh, probe) - expect) <= 0.01 * expect


def test_error_metric_flow_equals_hand_quadrature():
    # E(f, f_h^3) for Euler on the pendulum flow
    h = 0.02
    gh = lambda y: closed_form_field("euler", PEND, y, h)
    probe = FlowProbe(PEND, (0.0, 1.0), 2.0, mesh_per_unit=2000)
    val = error_metric(PEND, gh, probe)
    from imdelab.integrators import reference_trajectory
    times = np.linspace(0.0, 2.0, 4001)
    traj = reference_trajectory(PEND, (0.0, 1.0), times)
    comps = tuple(traj[:, i] for i in range(2))
    gap = np.max(np.abs(np.stack(PEND(comps), axis=1)
                        - np.stack(gh(comps), axis=1)), axis=1)
    hand = float(np.trapezoid(gap, times))
    assert abs(val - hand) <= 1e-12 * max(1.0, hand)
    assert val > 0


def test_convergence_order_examples():
    assert convergence_order(0.2, 0.1) == pytest.approx(1.0)
    assert convergence_order(0.4, 0.1) == pytest.approx(2.0)
    got = convergence_order(0.277, 0.139)
    assert got == pytest.approx(0.9948, abs=5e-4)
    assert abs(got - 0.992) <= 5e-3  # printed table value, within rounding
    with pytest.raises(NonPositiveError):
        convergence_order(0.0, 0.1)
