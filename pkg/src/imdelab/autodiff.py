"""Reverse-mode automatic differentiation over numpy arrays.

A `Tensor` wraps an ndarray and records how it was produced.  `grad`
walks the trace in reverse topological order and accumulates
vector-Jacobian products.  Every vjp is itself written in Tensor
operations, so gradients carry their own trace and can be differentiated
again (`create_graph=True`) -- that is all the second-order machinery the
Hamiltonian losses need.

The op set is deliberately small: affine algebra, the activations, the
trig/exp primitives used by closed-form fields, reductions, and the
row/column surgery required to route batches through integrator steps.
Unsupported access raises immediately rather than silently detaching.
"""

import numpy as np

from . import kernels

__all__ = ["Tensor", "tensor", "grad", "stack_cols"]


def tensor(value):
    """Wrap a constant (leaf) value."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _ub(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    while g.value.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.value.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Tensor:
    __slots__ = ("value", "parents", "vjp")

    # force numpy to defer to our reflected operators instead of building
    # object arrays element by element
    __array_ufunc__ = None

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.parents = parents
        self.vjp = vjp

    # -- conveniences -----------------------------------------------------

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        return float(self.value)

    def __repr__(self):
        return f"Tensor({self.value!r})"

    def detach(self):
        return Tensor(self.value)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = tensor(other)
        sa, sb = self.value.shape, other.value.shape
        return Tensor(self.value + other.value, (self, other),
                      lambda g: (_ub(g, sa), _ub(g, sb)))

    __radd__ = __add__

    def __sub__(self, other):
        other = tensor(other)
        sa, sb = self.value.shape, other.value.shape
        return Tensor(self.value - other.value, (self, other),
                      lambda g: (_ub(g, sa), _ub(-g, sb)))

    def __rsub__(self, other):
        return tensor(other) - self

    def __neg__(self):
        return Tensor(-self.value, (self,), lambda g: (-g,))

    def __mul__(self, other):
        other = tensor(other)
        a, b = self, other
        sa, sb = a.value.shape, b.value.shape
        return Tensor(a.value * b.value, (a, b),
                      lambda g: (_ub(g * b, sa), _ub(g * a, sb)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = tensor(other)
        a, b = self, other
        sa, sb = a.value.shape, b.value.shape
        return Tensor(a.value / b.value, (a, b),
                      lambda g: (_ub(g / b, sa), _ub(-g * a / (b * b), sb)))

    def __rtruediv__(self, other):
        return tensor(other) / self

    def __pow__(self, n):
        n = int(n)
        a = self
        if n == 0:
            return Tensor(np.ones_like(a.value), (a,),
                          lambda g: (Tensor(np.zeros_like(a.value)),))
        return Tensor(a.value ** n, (a,),
                      lambda g: (g * (float(n) * a ** (n - 1)),))

    def __matmul__(self, other):
        other = tensor(other)
        a, b = self, other
        return Tensor(a.value @ b.value, (a, b),
                      lambda g: (g @ b.T, a.T @ g))

    @property
    def T(self):
        a = self
        return Tensor(a.value.T, (a,), lambda g: (g.T,))

    # -- analytic primitives -------------------------------------------------

    def tanh(self):
        a = self
        out = Tensor(np.tanh(a.value), (a,), None)
        out.vjp = lambda g: (_tanh_bwd(g, out),)
        return out

    def sigmoid(self):
        a = self
        out = Tensor(kernels.sigmoid_fwd(a.value), (a,), None)
        out.vjp = lambda g: (_sigmoid_bwd(g, out),)
        return out

    def sin(self):
        a = self
        return Tensor(np.sin(a.value), (a,), lambda g: (g * a.cos(),))

    def cos(self):
        a = self
        return Tensor(np.cos(a.value), (a,), lambda g: (-(g * a.sin()),))

    def exp(self):
        a = self
        out = Tensor(np.exp(a.value), (a,), None)
        out.vjp = lambda g: (g * out,)
        return out

    # -- reductions and shape surgery ----------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self
        shape = a.value.shape
        val = a.value.sum(axis=axis, keepdims=keepdims)

        def back(g):
            gv = g
            if axis is not None and not keepdims:
                gv = gv.reshape(_keepdims_shape(shape, axis))
            return (gv.broadcast_to(shape),)

        return Tensor(val, (a,), back)

    def mean(self, axis=None, keepdims=False):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, shape):
        a = self
        old = a.value.shape
        return Tensor(a.value.reshape(shape), (a,),
                      lambda g: (g.reshape(old),))

    def broadcast_to(self, shape):
        a = self
        old = a.value.shape
        return Tensor(np.broadcast_to(a.value, shape).copy(), (a,),
                      lambda g: (_ub(g, old),))

    def rows(self, start, stop):
        a = self
        total = a.value.shape[0]
        return Tensor(a.value[start:stop], (a,),
                      lambda g: (g.pad_rows(start, total),))

    def pad_rows(self, start, total):
        a = self
        nrows = a.value.shape[0]
        val = np.zeros((total,) + a.value.shape[1:])
        val[start:start + nrows] = a.value
        return Tensor(val, (a,),
                      lambda g: (g.rows(start, start + nrows),))

    def cols(self, j0, j1):
        a = self
        width = a.value.shape[1]
        return Tensor(a.value[:, j0:j1], (a,),
                      lambda g: (g.pad_cols(j0, width),))

    def pad_cols(self, j0, width):
        a = self
        ncols = a.value.shape[1]
        val = np.zeros(a.value.shape[:1] + (width,) + a.value.shape[2:])
        val[:, j0:j0 + ncols] = a.value
        return Tensor(val, (a,),
                      lambda g: (g.cols(j0, j0 + ncols),))


def _keepdims_shape(shape, axis):
    s = list(shape)
    s[axis] = 1
    return tuple(s)


def _tanh_bwd(g, y):
    """Fused g*(1-y^2) as a primitive whose own vjp stays differentiable."""
    return Tensor(kernels.tanh_bwd(g.value, y.value), (g, y),
                  lambda gg: (_tanh_bwd(gg, y), -2.0 * (gg * g * y)))


def _sigmoid_bwd(g, y):
    """Fused g*y*(1-y) with a differentiable vjp."""
    return Tensor(kernels.sigmoid_bwd(g.value, y.value), (g, y),
                  lambda gg: (_sigmoid_bwd(gg, y), gg * g * (1.0 - 2.0 * y)))


def stack_cols(comps):
    """Build an (n, k) tensor from k one-dimensional (n,) tensors."""
    cols = [c.reshape((c.value.shape[0], 1)) for c in comps]
    out = cols[0]
    width = len(cols)
    if width == 1:
        return out
    vals = np.concatenate([c.value for c in cols], axis=1)

    def back(g):
        return tuple(g.cols(j, j + 1) for j in range(width))

    return Tensor(vals, tuple(cols), back)


def grad(output, wrt, create_graph=False, seed=None):
    """Gradients of `output` with respect to the tensors in `wrt`.

    Returns one Tensor per entry of wrt (zeros for unreachable leaves).
    With create_graph=True the results can be differentiated again.
    """
    topo = []
    seen = set()
    stack = [(output, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads = {id(output): seed if seed is not None
             else Tensor(np.ones_like(output.value))}
    for node in reversed(topo):
        g = grads.get(id(node))
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg

    out = []
    for w in wrt:
        g = grads.get(id(w))
        if g is None:
            g = Tensor(np.zeros_like(w.value))
        out.append(g if create_graph else g.detach())
    return out
