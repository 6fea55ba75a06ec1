"""Multilayer perceptrons, Adam, learning-rate schedules and checkpoints.

Networks are plain weight arrays in double precision.  Three evaluation
paths share them:

* `apply` -- vectorized numpy inference on an (n, d_in) batch;
* `forward_tensor` -- the same pass recorded on the autodiff tape, used
  by every training loss;
* `eval_generic` -- scalar loops over the weights, so a network can be
  evaluated on jets and differentiated like any closed-form field.

`hamiltonian_field_from_net` turns a scalar network u into the vector
field J^{-1} grad u, differentiable again for training.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels, scalars
from .autodiff import Tensor, grad
from .errors import OddDimension

__all__ = ["Mlp", "AdamState", "LrSchedule", "mlp_forward", "grad_params",
           "adam_step", "hamiltonian_field_from_net", "HamiltonianNetField",
           "save_checkpoint", "load_checkpoint"]

_ACTIVATIONS = ("tanh", "sigmoid")


@dataclass
class Mlp:
    """Dense network: affine/activation pairs, final layer affine."""

    widths: tuple
    activation: str
    weights: list
    biases: list
    seed: int = 0

    @classmethod
    def init(cls, widths, activation, seed):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for win, wout in zip(widths[:-1], widths[1:]):
            bound = np.sqrt(6.0 / (win + wout))
            ws.append(rng.uniform(-bound, bound, size=(win, wout)))
            bs.append(np.zeros(wout))
        return cls(tuple(widths), activation, ws, bs, seed)

    @property
    def parameter_count(self):
        return sum((win + 1) * wout
                   for win, wout in zip(self.widths[:-1], self.widths[1:]))

    @property
    def dim_in(self):
        return self.widths[0]

    @property
    def dim_out(self):
        return self.widths[-1]

    def _act_np(self, z):
        return np.tanh(z) if self.activation == "tanh" \
            else kernels.sigmoid_fwd(z)

    def apply(self, x):
        """Numpy forward pass on an (n, d_in) array."""
        h = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if l < last:
                h = self._act_np(h)
        return h

    def param_tensors(self):
        """Fresh leaf tensors in the fixed order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(Tensor(w))
            out.append(Tensor(b))
        return out

    def forward_tensor(self, x, params):
        """Tape-recorded forward pass; params from param_tensors()."""
        h = x
        last = len(self.weights) - 1
        for l in range(len(self.weights)):
            h = h @ params[2 * l] + params[2 * l + 1]
            if l < last:
                h = h.tanh() if self.activation == "tanh" else h.sigmoid()
        return h

    def set_params(self, arrays):
        for l in range(len(self.weights)):
            self.weights[l] = np.array(arrays[2 * l], dtype=float)
            self.biases[l] = np.array(arrays[2 * l + 1], dtype=float)

    def param_arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    # -- field-style adapters ---------------------------------------------

    def field(self):
        """The net as a field over tuple-of-component batches (numpy)."""
        def f(y):
            x, scalar = _as_batch(y)
            out = self.apply(x)
            return tuple(out[0, i] if scalar else out[:, i]
                         for i in range(out.shape[1]))
        return f

    def eval_generic(self, y):
        """Forward pass with scalar loops; works on jets and plain numbers."""
        h = list(y)
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            nxt = []
            for j in range(w.shape[1]):
                acc = b[j]
                for i in range(w.shape[0]):
                    acc = acc + h[i] * w[i, j]
                nxt.append(acc)
            if l < last:
                act = scalars.tanh if self.activation == "tanh" \
                    else scalars.sigmoid
                nxt = [act(z) for z in nxt]
            h = nxt
        return tuple(h)

    def grad_input(self, x):
        """d(sum of outputs)/dx per row of the (n, d_in) batch, by hand-
        rolled backprop; used for fast Hamiltonian-field evaluation."""
        x = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        h = x
        acts = []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if l < last:
                h = self._act_np(z)
                acts.append(h)
            else:
                h = z
        g = np.ones_like(h)
        for l in range(last, -1, -1):
            g = g @ self.weights[l].T
            if l > 0:
                a = acts[l - 1]
                if self.activation == "tanh":
                    g = kernels.tanh_bwd(g, a)
                else:
                    g = kernels.sigmoid_bwd(g, a)
        return g


def _as_batch(y):
    cols = [np.asarray(c, dtype=float) for c in y]
    scalar = cols[0].ndim == 0
    if scalar:
        return np.array(cols).reshape(1, -1), True
    return np.stack(cols, axis=1), False


def mlp_forward(net, x):
    """Forward pass at a single point (sequence of d_in numbers)."""
    out = net.apply(np.asarray(x, dtype=float).reshape(1, -1))
    return tuple(out[0])


def grad_params(loss, params):
    """Reverse accumulation of a scalar loss; returns plain arrays."""
    return [g.value for g in grad(loss, params)]


@dataclass
class AdamState:
    """First/second moment accumulators with bias correction."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params):
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(state, params, grads, lr):
    """One fused Adam update, in place on the parameter arrays."""
    state.step += 1
    bc1 = 1.0 / (1.0 - state.beta1 ** state.step)
    bc2 = 1.0 / (1.0 - state.beta2 ** state.step)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != np.asarray(g).shape:
            raise ValueError("parameter/gradient shape mismatch")
        kernels.adam_update(p, np.asarray(g, dtype=float), m, v,
                            float(lr), state.beta1, state.beta2, state.eps,
                            bc1, bc2)
    return params


@dataclass(frozen=True)
class LrSchedule:
    """constant, or exponential decay with linearly decreasing powers:
    lr(t) = start * (end/start)^(t/total)."""

    kind: str = "constant"
    start: float = 1e-3
    end: float = 1e-3
    total: int = 1

    def __call__(self, t):
        if self.kind == "constant":
            return self.start
        if self.kind == "exp-decay":
            frac = min(max(t / self.total, 0.0), 1.0)
            return self.start * (self.end / self.start) ** frac
        raise ValueError(f"unknown schedule kind {self.kind!r}")


class HamiltonianNetField:
    """J^{-1} grad u for a scalar network u over points (p, q)."""

    def __init__(self, net):
        if net.dim_in % 2:
            raise OddDimension("Hamiltonian field needs even input dimension")
        if net.dim_out != 1:
            raise ValueError("Hamiltonian network must have scalar output")
        self.net = net
        self.n = net.dim_in // 2

    def __call__(self, y):
        """Tuple-of-components evaluation (numpy fast path)."""
        x, scalar = _as_batch(y)
        g = self.net.grad_input(x)
        n = self.n
        out = np.concatenate([-g[:, n:], g[:, :n]], axis=1)
        return tuple(out[0, i] if scalar else out[:, i]
                     for i in range(out.shape[1]))

    def generic(self, y):
        """Jet-evaluable path, for differentiating the field itself."""
        from .flows import gradient
        g = gradient(lambda z: self.net.eval_generic(z)[0], y)
        n = self.n
        return tuple(-c for c in g[n:]) + tuple(g[:n])

    def tensor_field(self, params):
        """Batched tape evaluation X (m, 2n) -> J^{-1} grad u(X), still
        differentiable with respect to `params`."""
        net, n = self.net, self.n

        def f(x):
            u = net.forward_tensor(x, params)
            (gx,) = grad(u.sum(), [x], create_graph=True)
            gp = gx.cols(0, n)
            gq = gx.cols(n, 2 * n)
            neg = -gq
            return _concat_cols(neg, gp)

        return f


def _concat_cols(a, b):
    wa = a.value.shape[1]
    wb = b.value.shape[1]
    return a.pad_cols(0, wa + wb) + b.pad_cols(wa, wa + wb)


def hamiltonian_field_from_net(u):
    """Field-like evaluator y -> J^{-1} grad u(y) for a scalar net (or any
    jet-evaluable scalar function wrapped in a FieldExpr)."""
    if isinstance(u, Mlp):
        return HamiltonianNetField(u)
    # closed-form scalar function: differentiate with jets
    from .flows import gradient
    from .integrators import _scalar_fn
    hfun = _scalar_fn(u)

    def f(y):
        if len(y) % 2:
            raise OddDimension("Hamiltonian field needs even dimension")
        n = len(y) // 2
        g = gradient(hfun, y)
        return tuple(-c for c in g[n:]) + tuple(g[:n])

    return f


# -- checkpoints ------------------------------------------------------------------

def save_checkpoint(path, net, adam=None):
    """Versioned JSON checkpoint; optimizer state optional."""
    doc = {
        "schema": 1,
        "widths": list(net.widths),
        "activation": net.activation,
        "seed": net.seed,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    if adam is not None:
        doc["optimizer"] = {
            "step": adam.step,
            "m": [m.ravel().tolist() for m in adam.m],
            "v": [v.ravel().tolist() for v in adam.v],
        }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != 1:
        raise ValueError(f"unsupported checkpoint schema {doc.get('schema')!r}")
    widths = tuple(doc["widths"])
    net = Mlp.init(widths, doc["activation"], doc["seed"])
    for l, (win, wout) in enumerate(zip(widths[:-1], widths[1:])):
        net.weights[l] = np.array(doc["weights"][l], dtype=float).reshape(win, wout)
        net.biases[l] = np.array(doc["biases"][l], dtype=float)
    adam = None
    if "optimizer" in doc:
        opt = doc["optimizer"]
        adam = AdamState.init(net.param_arrays())
        adam.step = opt["step"]
        shapes = [p.shape for p in net.param_arrays()]
        adam.m = [np.array(m, dtype=float).reshape(s)
                  for m, s in zip(opt["m"], shapes)]
        adam.v = [np.array(v, dtype=float).reshape(s)
                  for v, s in zip(opt["v"], shapes)]
    return net, adam
