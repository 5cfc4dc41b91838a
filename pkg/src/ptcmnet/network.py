"""Fully connected feedforward network with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "elu", "linear")


@dataclass(frozen=True)
class LayerSpec:
    units: int
    activation: str = "relu"
    dropout: float = 0.0

    def __post_init__(self):
        if self.units < 1:
            raise ValueError("a layer needs at least one unit")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {ACTIVATIONS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if name == "elu":
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    return z


def _activation_grad(name, z, a):
    """Derivative of the activation, given pre-activation ``z`` and output ``a``."""
    if name == "relu":
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "elu":
        return np.where(z < 0, a + 1.0, 1.0)
    return np.ones_like(z)


@dataclass
class NetworkParams:
    """Weights of the hidden stack, the scalar output unit and the optional
    linear part used when the predictor is orthogonalized.

    ``weights[l]`` has shape ``(n_{l-1}, n_l)``. Scalars (``b_out``,
    ``b_lin``) are 0-d arrays so that optimizers can update them in place.
    """

    input_dim: int
    layers: tuple
    weights: list
    biases: list
    w_out: np.ndarray
    b_out: np.ndarray
    w_lin: np.ndarray | None = None
    b_lin: np.ndarray | None = None

    @property
    def output_dim(self) -> int:
        return self.layers[-1].units if self.layers else self.input_dim

    def named_arrays(self) -> dict:
        out = {}
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{l}"] = W
            out[f"b{l}"] = b
        out["w_out"] = self.w_out
        out["b_out"] = self.b_out
        if self.w_lin is not None:
            out["w_lin"] = self.w_lin
            out["b_lin"] = self.b_lin
        return out

    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.named_arrays().values()))

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.input_dim,
            self.layers,
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.w_out.copy(),
            self.b_out.copy(),
            None if self.w_lin is None else self.w_lin.copy(),
            None if self.b_lin is None else self.b_lin.copy(),
        )

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": [
                {
                    "units": spec.units,
                    "activation": spec.activation,
                    "dropout": spec.dropout,
                    "weight": W.tolist(),
                    "bias": b.tolist(),
                }
                for spec, W, b in zip(self.layers, self.weights, self.biases)
            ],
            "output": {"weight": self.w_out.tolist(), "bias": float(self.b_out)},
        }

    @classmethod
    def from_dict(cls, d: dict, linear_part: dict | None = None) -> "NetworkParams":
        layers, weights, biases = [], [], []
        for layer in d["hidden"]:
            layers.append(LayerSpec(layer["units"], layer["activation"], layer["dropout"]))
            weights.append(np.array(layer["weight"], dtype=float).reshape(-1, layer["units"]))
            biases.append(np.array(layer["bias"], dtype=float))
        w_lin = b_lin = None
        if linear_part is not None:
            w_lin = np.array(linear_part["weight"], dtype=float)
            b_lin = np.array(linear_part["bias"], dtype=float)
        return cls(
            int(d["input_dim"]),
            tuple(layers),
            weights,
            biases,
            np.array(d["output"]["weight"], dtype=float),
            np.array(d["output"]["bias"], dtype=float),
            w_lin,
            b_lin,
        )


def init_params(input_dim: int, layers, seed=0, linear_part: bool = False) -> NetworkParams:
    """Glorot-uniform weights, zero biases.

    With ``layers=[]`` the network reduces to ``w_out @ x + b_out``.
    """
    if input_dim < 1:
        raise ValueError("input dimension must be at least 1")
    layers = tuple(layers)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    fan_in = input_dim
    for spec in layers:
        bound = np.sqrt(6.0 / (fan_in + spec.units))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, spec.units)))
        biases.append(np.zeros(spec.units))
        fan_in = spec.units
    bound = np.sqrt(6.0 / (fan_in + 1))
    w_out = rng.uniform(-bound, bound, size=fan_in)
    w_lin = np.zeros(input_dim) if linear_part else None
    b_lin = np.array(0.0) if linear_part else None
    return NetworkParams(input_dim, layers, weights, biases, w_out, np.array(0.0), w_lin, b_lin)


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)
    masks: list = field(default_factory=list)


def forward(params: NetworkParams, X, training: bool = False, rng=None):
    """Run the hidden stack and return the last hidden representation.

    Dropout is inverted (kept units scaled by ``1 / (1 - rate)``) and only
    applied when ``training`` is true.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(f"expected input with {params.input_dim} columns, got shape {X.shape}")
    if training and rng is None:
        rng = np.random.default_rng(0)
    cache = ForwardCache()
    h = X
    for spec, W, b in zip(params.layers, params.weights, params.biases):
        cache.inputs.append(h)
        z = h @ W + b
        a = _activate(spec.activation, z)
        cache.pre.append(z)
        cache.post.append(a)
        if training and spec.dropout > 0:
            keep = 1.0 - spec.dropout
            mask = (rng.random(a.shape) < keep) / keep
            h = a * mask
        else:
            mask = None
            h = a
        cache.masks.append(mask)
    return h, cache


def backward(params: NetworkParams, cache: ForwardCache, upstream):
    """Reverse-mode gradients of ``sum(upstream * H)`` for the hidden stack.

    Returns ``(grads, grad_X)`` where ``grads`` maps ``W{l}``/``b{l}`` to arrays.
    """
    g = np.asarray(upstream, dtype=float)
    if len(cache.inputs) != len(params.layers):
        raise ValueError("cache does not belong to this network")
    if params.layers and g.shape != cache.post[-1].shape:
        raise ValueError(f"upstream gradient shape {g.shape} does not match the cache")
    grads = {}
    for l in reversed(range(len(params.layers))):
        spec = params.layers[l]
        if cache.masks[l] is not None:
            g = g * cache.masks[l]
        g = g * _activation_grad(spec.activation, cache.pre[l], cache.post[l])
        grads[f"W{l}"] = cache.inputs[l].T @ g
        grads[f"b{l}"] = g.sum(axis=0)
        g = g @ params.weights[l].T
    return grads, g
