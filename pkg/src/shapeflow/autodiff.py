"""Reverse-mode automatic differentiation over numpy arrays.

A deliberately small tape: dense affine maps, tanh/relu, sin/cos
featurization, gather + mean aggregation, and sum-of-squares reductions
are all the networks in this package need.  Everything is float64 and
evaluated in a fixed order, so gradients are bit-reproducible.

Typical use::

    x = Tensor(np.zeros((n, 3)))          # constant input
    w = Tensor(w0, requires_grad=True)    # parameter
    loss = ((x @ w.T()).tanh() ** 2).sum()
    loss.backward()
    w.grad                                # dloss/dw
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "concat", "check_gradient", "Adam"]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (adjoint of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_tensor(x) -> "Tensor":
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    # -- construction of derived nodes --
    def _child(self, data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad or p._parents for p in parents):
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None})"

    # -- arithmetic --
    def __add__(self, other):
        other = _as_tensor(other)

        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))

        return self._child(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_tensor(other)

        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape))

        return self._child(self.data - other.data, (self, other), backward)

    def __rsub__(self, other):
        return _as_tensor(other).__sub__(self)

    def __mul__(self, other):
        other = _as_tensor(other)

        def backward(g):
            return (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            )

        return self._child(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __neg__(self):
        return self._child(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent: int):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")

        def backward(g):
            return (g * exponent * self.data ** (exponent - 1),)

        return self._child(self.data ** exponent, (self,), backward)

    def __matmul__(self, other):
        other = _as_tensor(other)

        def backward(g):
            a, b = self.data, other.data
            if a.ndim == 1 or b.ndim == 1:
                raise NotImplementedError("matmul tape needs 2D+ operands")
            ga = g @ np.swapaxes(b, -1, -2)
            gb = np.swapaxes(a, -1, -2) @ g
            return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

        return self._child(self.data @ other.data, (self, other), backward)

    # -- elementwise nonlinearities --
    def tanh(self):
        out_data = np.tanh(self.data)

        def backward(g):
            return (g * (1.0 - out_data * out_data),)

        return self._child(out_data, (self,), backward)

    def relu(self):
        mask = self.data > 0

        def backward(g):
            return (g * mask,)

        return self._child(np.where(mask, self.data, 0.0), (self,), backward)

    def sin(self):
        def backward(g):
            return (g * np.cos(self.data),)

        return self._child(np.sin(self.data), (self,), backward)

    def cos(self):
        def backward(g):
            return (-g * np.sin(self.data),)

        return self._child(np.cos(self.data), (self,), backward)

    # -- reductions and shaping --
    def sum(self, axis=None):
        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            gg = np.expand_dims(g, axis)
            return (np.broadcast_to(gg, self.shape).copy(),)

        return self._child(self.data.sum(axis=axis), (self,), backward)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g / n, self.shape).copy(),)
            gg = np.expand_dims(g, axis) / n
            return (np.broadcast_to(gg, self.shape).copy(),)

        return self._child(self.data.mean(axis=axis), (self,), backward)

    def reshape(self, *shape):
        def backward(g):
            return (g.reshape(self.shape),)

        return self._child(self.data.reshape(*shape), (self,), backward)

    def T(self):
        if self.data.ndim != 2:
            raise ValueError("T() expects a 2D tensor")

        def backward(g):
            return (g.T,)

        return self._child(self.data.T, (self,), backward)

    def take(self, indices):
        """Gather along axis 0 with an arbitrary integer index array."""
        idx = np.asarray(indices, dtype=np.int64)

        def backward(g):
            out = np.zeros(self.shape)
            np.add.at(out, idx, g)
            return (out,)

        return self._child(self.data[idx], (self,), backward)

    def neighbor_mean(self, adjacency):
        """Mean over axis-0 gathered neighbors: ``out[i] = mean_j x[adj[i, j]]``."""
        adj = np.asarray(adjacency, dtype=np.int64)
        k = adj.shape[1]

        def backward(g):
            out = np.zeros(self.shape)
            gk = np.repeat((g / k)[:, None, ...], k, axis=1)
            np.add.at(out, adj, gk)
            return (out,)

        return self._child(self.data[adj].mean(axis=1), (self,), backward)

    # -- autodiff driver --
    def backward(self, seed=None):
        """Accumulate gradients of this (scalar) tensor into the graph."""
        if seed is None:
            if self.data.shape != ():
                raise ValueError("backward() without seed needs a scalar")
            seed = np.ones(())
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                topo.append(node)
            else:
                stack.append((node, True))
                for p in node._parents:
                    if id(p) not in seen:
                        stack.append((p, False))
        grads = {id(self): np.asarray(seed, dtype=float)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    def item(self) -> float:
        return float(self.data)


def concat(tensors, axis: int = 0) -> Tensor:
    """Concatenate tensors along an axis (tape-aware)."""
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        outs = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            outs.append(g[tuple(sl)])
        return tuple(outs)

    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    if any(t.requires_grad or t._parents for t in tensors):
        out._parents = tuple(tensors)
        out._backward = backward
    return out


def check_gradient(loss_fn, params, h: float = 1e-5):
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn()`` must rebuild the scalar loss from the current parameter
    values.  Returns the maximum relative error over all parameter entries
    (relative to the larger of |analytic| and |numeric|, floored at the
    global gradient scale to avoid 0/0 blowups on dead entries).
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [np.array(p.grad if p.grad is not None else np.zeros(p.shape))
                for p in params]
    scale = max(float(np.abs(a).max()) for a in analytic) if params else 1.0
    scale = max(scale, 1e-12)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn().item()
            flat[i] = orig - h
            f_minus = loss_fn().item()
            flat[i] = orig
            num = (f_plus - f_minus) / (2.0 * h)
            ana = ga.reshape(-1)[i]
            denom = max(abs(num), abs(ana), 1e-2 * scale)
            worst = max(worst, abs(num - ana) / denom)
    return worst


class Adam:
    """Adam optimizer over a list of parameter tensors."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
