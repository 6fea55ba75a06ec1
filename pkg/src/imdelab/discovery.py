"""Dataset generation, training objectives, the training loop and metrics.

The three objectives mirror the three model families:

* ODE-net       -- mean squared mismatch of the S-fold composed solver
                   applied to the network field, against exact flow targets;
* LMNet         -- summed residual of the multistep formula along a
                   trajectory, with the network replacing the field;
* HNN           -- either the symplectic-Euler residual on the partials of
                   a scalar network, or the ODE-net objective applied to
                   J^{-1} grad u for explicit integrators.

Differentiation through the solver unrolls the composed steps on the tape
(discretize-then-differentiate).  Targets always come from the reference
flow at tolerance 1e-13.
"""

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, grad
from .integrators import SolverSpec, reference_flow, reference_trajectory
from .nn import Mlp, AdamState, adam_step, LrSchedule, hamiltonian_field_from_net
from .errors import NonFiniteLoss, NonPositiveError

__all__ = ["Dataset", "TrainConfig", "ErrorReport", "make_dataset",
           "odenet_loss", "lmnet_loss", "hnn_symplectic_euler_loss",
           "train", "evaluate_loss", "FlowProbe", "DomainProbe",
           "error_metric", "convergence_order", "as_array_field"]


def as_array_field(f):
    """Adapt a tuple-of-components field to the (n, N)-array convention the
    training losses use, for both ndarray and Tensor batches."""
    def wrapped(y):
        if isinstance(y, Tensor):
            n = y.value.shape[1]
            comps = tuple(y.cols(i, i + 1).reshape((-1,)) for i in range(n))
            out = f(comps)
            from .autodiff import stack_cols
            return stack_cols([c if isinstance(c, Tensor)
                               else Tensor(np.broadcast_to(np.asarray(c, dtype=float),
                                                           comps[0].value.shape))
                               for c in out])
        y = np.asarray(y, dtype=float)
        comps = tuple(y[:, i] for i in range(y.shape[1]))
        out = f(comps)
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), y.shape[0])
                         for c in out], axis=1)
    return wrapped


@dataclass
class Dataset:
    """Pairs (x_i, phi_T(x_i)); flow datasets chain x_{i+1} = phi_T(x_i)."""

    kind: str                 # "flow" | "domain"
    xs: np.ndarray            # (n, N)
    ys: np.ndarray            # (n, N)
    step: float               # data step T
    x0: tuple = None
    box: tuple = None
    seed: int = 0

    def __len__(self):
        return self.xs.shape[0]

    @property
    def trajectory(self):
        """The I+1 points of a flow dataset."""
        if self.kind != "flow":
            raise ValueError("trajectory only defined for flow datasets")
        return np.vstack([self.xs[:1], self.ys])


def make_dataset(field, kind, step, count, x0=None, box=None, seed=0,
                 tol=1e-13):
    """Generate a dataset with reference-flow targets.

    flow:   `count` pairs chained along one trajectory from x0;
    domain: `count` points uniform in the box, independently flowed.
    """
    if kind == "flow":
        pts = [tuple(float(c) for c in x0)]
        for _ in range(count):
            pts.append(reference_flow(field, pts[-1], step, tol=tol))
        arr = np.array(pts)
        return Dataset("flow", arr[:-1].copy(), arr[1:].copy(), step, x0=tuple(x0))
    if kind == "domain":
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        xs = rng.uniform(lo, hi, size=(count, len(box)))
        comps = reference_flow(field, tuple(xs[:, i] for i in range(len(box))),
                               step, tol=tol)
        ys = np.stack(comps, axis=1)
        return Dataset("domain", xs, ys, step, box=tuple(box), seed=seed)
    raise ValueError(f"unknown dataset kind {kind!r}")


# -- losses --------------------------------------------------------------------

def odenet_loss(field_fn, spec, xs, ys):
    """Mean over the batch of |ODESolve(x_i) - phi_T(x_i)|_2^2.

    Works on Tensors (training) and plain arrays (checks) alike.
    """
    y = xs
    for _ in range(spec.s):
        y = spec.method.step(field_fn, y, spec.h)
    n = ys.shape[0]
    return ((y - ys) ** 2).sum() * (1.0 / n)


def _rows(x, a, b):
    return x.rows(a, b) if isinstance(x, Tensor) else x[a:b]


def lmnet_loss(field_fn, scheme, trajectory, h):
    """Summed multistep residual along a trajectory y_0..y_I:

        sum_i | sum_m alpha_m/h y_{i+m} - sum_m beta_m net(y_{i+m}) |_2^2
    """
    m_steps = scheme.steps
    total = trajectory.shape[0]
    if total < m_steps + 1:
        raise ValueError(f"trajectory needs at least M+1={m_steps + 1} points")
    fvals = field_fn(trajectory)
    length = total - m_steps
    res = None
    for m in range(m_steps + 1):
        term = None
        if scheme.alpha[m] != 0.0:
            term = (scheme.alpha[m] / h) * _rows(trajectory, m, m + length)
        if scheme.beta[m] != 0.0:
            bterm = scheme.beta[m] * _rows(fvals, m, m + length)
            term = -bterm if term is None else term - bterm
        if term is None:
            continue
        res = term if res is None else res + term
    return (res ** 2).sum()


def _hnn_se_residual_terms(grads, xs, ys, h):
    n = xs.shape[1] // 2
    p, q = xs[:, :n], xs[:, n:]
    pbar, qbar = ys[:, :n], ys[:, n:]
    up, uq = grads
    rp = p - h * uq - pbar
    rq = q + h * up - qbar
    return rp, rq


def hnn_symplectic_euler_loss(u, xs, ys, h, params=None):
    """Mean residual of the symplectic-Euler relation on (x_i -> y_i) pairs,
    with the partials of the scalar function u taken at (pbar_i, q_i)."""
    n = xs.shape[1] // 2
    zin = np.concatenate([ys[:, :n], xs[:, n:]], axis=1)  # (pbar, q)
    if isinstance(u, Mlp):
        if params is None:
            params = u.param_tensors()
        z = Tensor(zin)
        uval = u.forward_tensor(z, params)
        (gz,) = grad(uval.sum(), [z], create_graph=True)
        up, uq = gz.cols(0, n), gz.cols(n, 2 * n)
        rp, rq = _hnn_se_residual_terms((up, uq), xs, ys, h)
        return ((rp ** 2).sum() + (rq ** 2).sum()) * (1.0 / xs.shape[0])
    # closed-form scalar function: batched jet gradient
    from .flows import gradient
    from .integrators import _scalar_fn
    hfun = _scalar_fn(u)
    g = gradient(hfun, tuple(zin[:, i] for i in range(zin.shape[1])))
    up = np.stack(np.broadcast_arrays(*g[:n]), axis=1)
    uq = np.stack(np.broadcast_arrays(*g[n:]), axis=1)
    rp, rq = _hnn_se_residual_terms((up, uq), xs, ys, h)
    return float(((rp ** 2).sum() + (rq ** 2).sum()) / xs.shape[0])


# -- training ---------------------------------------------------------------------

@dataclass
class TrainConfig:
    model: str                      # odenet | lmnet | hnn-symplectic-euler | hnn-explicit
    widths: tuple
    activation: str
    schedule: LrSchedule
    updates: int
    batch: int = 0                  # 0 = full batch
    seed: int = 0
    method: str = "euler"           # tableau name (odenet / hnn-explicit)
    h: float = 0.1
    s: int = 1                      # composition count
    lmm: str = "ab2"                # scheme name (lmnet)
    record_every: int = 100

    def solver_spec(self):
        return SolverSpec(self.method, self.h, self.s)


@dataclass
class ErrorReport:
    train_loss: float
    test_loss: float = math.nan
    e_vs_f: float = math.nan
    e_vs_imde: float = math.nan
    order: float = math.nan


def _config_loss(config, net, params, xs, ys, data):
    if config.model == "odenet":
        field_fn = lambda y: net.forward_tensor(y, params)
        return odenet_loss(field_fn, config.solver_spec(), Tensor(xs), ys)
    if config.model == "lmnet":
        from .integrators import LMM_SCHEMES
        scheme = LMM_SCHEMES[config.lmm]
        field_fn = lambda y: net.forward_tensor(y, params)
        return lmnet_loss(field_fn, scheme, Tensor(data.trajectory), config.h)
    if config.model == "hnn-symplectic-euler":
        return hnn_symplectic_euler_loss(net, xs, ys, config.h, params=params)
    if config.model == "hnn-explicit":
        ham = hamiltonian_field_from_net(net)
        field_fn = ham.tensor_field(params)
        return odenet_loss(field_fn, config.solver_spec(), Tensor(xs), ys)
    raise ValueError(f"unknown model kind {config.model!r}")


def train(config, data):
    """Seeded mini-batch Adam; returns (net, loss_curve, adam_state).

    The loss is recorded every `record_every` updates plus once at the end;
    a non-finite loss aborts with NonFiniteLoss.
    """
    rng = np.random.default_rng(config.seed)
    net = Mlp.init(config.widths, config.activation, config.seed)
    params_np = net.param_arrays()
    adam = AdamState.init(params_np)
    n = len(data)
    batch = n if config.batch in (0, None) else min(config.batch, n)
    curve = []
    loss_val = math.nan
    for t in range(config.updates):
        if batch < n and config.model != "lmnet":
            idx = rng.choice(n, size=batch, replace=False)
            xs, ys = data.xs[idx], data.ys[idx]
        else:
            xs, ys = data.xs, data.ys
        params = [Tensor(p) for p in params_np]
        loss = _config_loss(config, net, params, xs, ys, data)
        loss_val = loss.item()
        if not math.isfinite(loss_val):
            raise NonFiniteLoss(f"loss became {loss_val} at update {t}")
        if t % config.record_every == 0:
            curve.append((t, loss_val))
        gs = [g.value for g in grad(loss, params)]
        adam_step(adam, params_np, gs, config.schedule(t))
    final = evaluate_loss(config, net, data)
    curve.append((config.updates, final))
    return net, curve, adam


def evaluate_loss(config, net, data):
    """Full-batch loss of a trained net on a dataset."""
    params = [Tensor(p) for p in net.param_arrays()]
    loss = _config_loss(config, net, params, data.xs, data.ys, data)
    return loss.item()


# -- error metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class FlowProbe:
    """Trapezoid quadrature of |g - ghat|_inf along a reference trajectory."""

    field: object
    x0: tuple
    total_time: float
    mesh_per_unit: int = 2000
    tol: float = 1e-13


@dataclass(frozen=True)
class DomainProbe:
    """Monte Carlo estimate of the box integral of |g - ghat|_inf."""

    box: tuple
    samples: int = 100000
    seed: int = 0


def _inf_norm_gap(g, gh, comps):
    a = g(comps)
    b = gh(comps)
    width = len(a)
    n = np.broadcast(*[np.asarray(c) for c in a]).shape
    gap = None
    for i in range(width):
        d = np.abs(np.asarray(a[i]) - np.asarray(b[i]))
        d = np.broadcast_to(d, n)
        gap = d if gap is None else np.maximum(gap, d)
    return gap


def error_metric(g, gh, probe):
    """E(g, ghat) for a flow or domain probe; g and ghat are fields over
    tuple-of-component batches."""
    if isinstance(probe, FlowProbe):
        n_mesh = int(math.ceil(probe.total_time * probe.mesh_per_unit)) + 1
        times = np.linspace(0.0, probe.total_time, n_mesh)
        traj = reference_trajectory(probe.field, probe.x0, times, tol=probe.tol)
        comps = tuple(traj[:, i] for i in range(traj.shape[1]))
        gap = _inf_norm_gap(g, gh, comps)
        return float(np.trapezoid(gap, times))
    if isinstance(probe, DomainProbe):
        rng = np.random.default_rng(probe.seed)
        lo = np.array([b[0] for b in probe.box])
        hi = np.array([b[1] for b in probe.box])
        pts = rng.uniform(lo, hi, size=(probe.samples, len(probe.box)))
        comps = tuple(pts[:, i] for i in range(pts.shape[1]))
        gap = _inf_norm_gap(g, gh, comps)
        volume = float(np.prod(hi - lo))
        return float(gap.mean() * volume)
    raise TypeError(f"unknown probe type {type(probe).__name__}")


def convergence_order(e_2h, e_h):
    """log2(E(2h) / E(h)); both errors must be positive."""
    if e_2h <= 0.0 or e_h <= 0.0:
        raise NonPositiveError("order needs two positive errors")
    return math.log2(e_2h / e_h)
