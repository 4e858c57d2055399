"""Small dense networks on top of the in-repo autodiff tape."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

__all__ = ["MLP"]

_ACTIVATIONS = ("tanh", "relu", "linear")


class MLP:
    """Fully connected network, float64, seeded initialization.

    ``sizes`` lists layer widths input-first, e.g. ``(3, 32, 32, 3)``.
    ``activation`` applies to hidden layers, ``out_activation`` to the last
    layer (default linear).  Weights are ``Tensor`` leaves registered for
    gradients; collect them via :attr:`parameters`.
    """

    def __init__(self, sizes, activation="tanh", out_activation="linear",
                 rng=None, init_scale=1.0):
        if activation not in _ACTIVATIONS or out_activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self.out_activation = out_activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = rng.standard_normal((n_out, n_in)) * (init_scale / np.sqrt(n_in))
            self.weights.append(Tensor(w, requires_grad=True))
            self.biases.append(Tensor(np.zeros(n_out), requires_grad=True))

    @property
    def parameters(self):
        return self.weights + self.biases

    @property
    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters)

    def _apply(self, h: Tensor, name: str) -> Tensor:
        if name == "tanh":
            return h.tanh()
        if name == "relu":
            return h.relu()
        return h

    def __call__(self, x) -> Tensor:
        """Forward pass; ``x`` is (n, sizes[0]) array or Tensor."""
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T() + b
            h = self._apply(h, self.activation if l < last else self.out_activation)
        return h

    def forward_with_input_jacobian(self, x):
        """Forward pass plus the per-point input Jacobian, both tape nodes.

        Only valid for ``tanh`` hidden activations with a linear output
        layer: the Jacobian is assembled as the layer-wise chain
        ``W_L diag(1-h^2) ... W_1``, entirely out of differentiable ops, so
        its Frobenius norm can appear inside a training loss.

        Returns ``(values (n, out), jacobians (n, out, in))``.
        """
        if self.activation != "tanh" or self.out_activation != "linear":
            raise ValueError("input Jacobian implemented for tanh/linear nets")
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))
        jac = None  # running product, shape (n, width, in)
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T() + b
            if jac is None:
                jac = w  # (width, in) broadcasts against the batch below
            else:
                jac = w @ jac
            if l < last:
                h = z.tanh()
                d = 1.0 - h * h  # (n, width)
                jac = d.reshape(d.shape[0], d.shape[1], 1) * jac
            else:
                h = z
        if len(jac.shape) == 2:  # purely affine net: constant Jacobian
            jac = Tensor(np.ones((h.shape[0], 1, 1))) * jac
        return h, jac

    # -- serialization --
    def state(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "activation": self.activation,
            "out_activation": self.out_activation,
            "weights": [w.data.tolist() for w in self.weights],
            "biases": [b.data.tolist() for b in self.biases],
        }

    @classmethod
    def from_state(cls, state: dict) -> "MLP":
        net = cls(state["sizes"], state["activation"], state["out_activation"])
        for w, data in zip(net.weights, state["weights"]):
            w.data = np.asarray(data, dtype=float)
        for b, data in zip(net.biases, state["biases"]):
            b.data = np.asarray(data, dtype=float)
        return net

    @classmethod
    def constant(cls, value, n_in: int = 3) -> "MLP":
        """Net that outputs ``value`` for every input (zero weights)."""
        value = np.asarray(value, dtype=float).ravel()
        net = cls((n_in, len(value)), activation="tanh", out_activation="linear",
                  rng=np.random.default_rng(0), init_scale=0.0)
        net.biases[0].data = value.copy()
        return net
