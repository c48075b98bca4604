"""Cascade-forward network: structure, forward pass, gradient and Jacobian.

Layer ``l`` (hidden layers first, output last) sees the concatenation of its
sources.  With ``cascade=True`` the sources are the input followed by every
earlier hidden layer; otherwise only the immediately preceding one.  All
parameters live in one flat vector: for each layer, its weight matrix
(row-major, columns in source order) followed by its bias vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NormalizationSpec:
    """Affine target map onto [0.1, 0.9] (``D_Min_Max``)."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got ({self.x_min}, {self.x_max})")


def dminmax(x, spec: NormalizationSpec):
    return 0.8 * (np.asarray(x, dtype=float) - spec.x_min) / (spec.x_max - spec.x_min) + 0.1


def dminmax_inverse(xn, spec: NormalizationSpec):
    return (np.asarray(xn, dtype=float) - 0.1) / 0.8 * (spec.x_max - spec.x_min) + spec.x_min


@dataclass(frozen=True)
class Topology:
    input_dim: int
    hidden: tuple[int, ...] = (20, 18, 10, 5)
    output_dim: int = 1
    cascade: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("all layer sizes must be >= 1")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return self.hidden + (self.output_dim,)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    def sources(self, layer: int) -> list[int]:
        """Source ids feeding ``layer``: 0 is the input, j+1 is hidden layer j."""
        if self.cascade:
            return list(range(layer + 1))
        return [layer]

    def source_width(self, src: int) -> int:
        return self.input_dim if src == 0 else self.hidden[src - 1]

    def fan_in(self, layer: int) -> int:
        return sum(self.source_width(s) for s in self.sources(layer))

    @property
    def n_params(self) -> int:
        return sum(n * (self.fan_in(l) + 1) for l, n in enumerate(self.layer_sizes))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "output_dim": self.output_dim,
            "cascade": self.cascade,
            "hidden_activation": "tanh",
            "output_activation": "identity",
        }

    @classmethod
    def from_dict(cls, d: dict) -> Topology:
        return cls(d["input_dim"], tuple(d["hidden"]), d["output_dim"], d["cascade"])


@dataclass
class CascadeNet:
    topology: Topology
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.topology.n_params,):
            raise ValueError(
                f"expected {self.topology.n_params} parameters, got {self.params.shape}"
            )

    def layers(self, params: np.ndarray | None = None):
        """Per-layer ``(W, b)`` views into ``params`` (defaults to this net's)."""
        p = self.params if params is None else params
        out, pos = [], 0
        for l, n in enumerate(self.topology.layer_sizes):
            fi = self.topology.fan_in(l)
            w = p[pos:pos + n * fi].reshape(n, fi)
            pos += n * fi
            b = p[pos:pos + n]
            pos += n
            out.append((w, b))
        return out

    def copy(self) -> CascadeNet:
        return CascadeNet(self.topology, self.params.copy())

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)


def init_weights(topology: Topology, seed: int) -> CascadeNet:
    """Uniform weights in +-1/sqrt(fan_in) per destination layer, zero biases."""
    rng = np.random.default_rng(seed)
    net = CascadeNet(topology, np.zeros(topology.n_params))
    for l, (w, _) in enumerate(net.layers()):
        bound = 1.0 / np.sqrt(topology.fan_in(l))
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return net


def _as_batch(net: CascadeNet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.topology.input_dim:
        raise ValueError(
            f"input dimension mismatch: net expects {net.topology.input_dim}, got {x.shape}"
        )
    return x, single


def _run(net: CascadeNet, x: np.ndarray, params=None):
    """Forward pass keeping every layer's source matrix and output."""
    topo = net.topology
    outs = [x]
    stacks = []
    layers = net.layers(params)
    for l, (w, b) in enumerate(layers):
        s = np.concatenate([outs[src] for src in topo.sources(l)], axis=1)
        stacks.append(s)
        z = s @ w.T + b
        outs.append(z if l == topo.n_layers - 1 else np.tanh(z))
    return outs, stacks


def forward(net: CascadeNet, x, params=None) -> np.ndarray:
    """Network output; shape ``(n,)`` for a batch with one output, scalar for one sample."""
    x, single = _as_batch(net, x)
    y = _run(net, x, params)[0][-1]
    if net.topology.output_dim == 1:
        y = y[:, 0]
    return y[0] if single else y


def _backward(net: CascadeNet, outs, stacks, delta_out: np.ndarray, per_sample: bool):
    """Backpropagate output sensitivities through cascade links.

    Returns per-layer (dW, db); batched along axis 0 when ``per_sample``.
    """
    topo = net.topology
    layers = net.layers()
    n_hidden = len(topo.hidden)
    upstream = [np.zeros_like(outs[j + 1]) for j in range(n_hidden)]
    grads = [None] * topo.n_layers
    for l in range(topo.n_layers - 1, -1, -1):
        w, _ = layers[l]
        if l == topo.n_layers - 1:
            delta = delta_out
        else:
            h = outs[l + 1]
            delta = upstream[l] * (1.0 - h * h)
        s = stacks[l]
        if per_sample:
            grads[l] = (delta[:, :, None] * s[:, None, :], delta)
        else:
            grads[l] = (delta.T @ s, delta.sum(axis=0))
        ds = delta @ w
        pos = 0
        for src in topo.sources(l):
            width = topo.source_width(src)
            if src > 0:
                upstream[src - 1] += ds[:, pos:pos + width]
            pos += width
    return grads


def residuals(net: CascadeNet, x, y, params=None) -> np.ndarray:
    x, _ = _as_batch(net, x)
    return forward(net, x, params) - np.asarray(y, dtype=float).reshape(-1)


def gradient(net: CascadeNet, x, y) -> np.ndarray:
    """Gradient of ``0.5 * sum(residual**2)`` with respect to the flat parameters."""
    x, _ = _as_batch(net, x)
    outs, stacks = _run(net, x)
    r = outs[-1][:, 0] - np.asarray(y, dtype=float).reshape(-1)
    grads = _backward(net, outs, stacks, r[:, None], per_sample=False)
    return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])


def jacobian(net: CascadeNet, x) -> np.ndarray:
    """Residual Jacobian ``d output_i / d params``, shape ``(n_samples, n_params)``."""
    x, _ = _as_batch(net, x)
    n = x.shape[0]
    outs, stacks = _run(net, x)
    grads = _backward(net, outs, stacks, np.ones((n, 1)), per_sample=True)
    return np.concatenate(
        [np.concatenate([dw.reshape(n, -1), db], axis=1) for dw, db in grads], axis=1
    )


def mse(net: CascadeNet, x, y, params=None) -> float:
    r = residuals(net, x, y, params)
    return float(np.mean(r * r))
