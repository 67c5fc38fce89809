"""Small fixed-topology feedforward networks with hand-written reverse mode.

Networks here are tiny (two hidden layers of 64/128 units) so everything is
plain float64 numpy: a forward pass records pre-activations and activations,
and ``backward`` walks the layers in reverse.  Parameter and gradient objects
are immutable; every update returns a fresh object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu")
HEADS = ("linear", "gaussian")
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ConfigurationError(ValueError):
    """Raised for invalid network or hyperparameter configuration."""


class ShapeError(ValueError):
    """Raised when array shapes do not line up with a network."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights ``(out, in)`` and biases ``(out,)`` for each layer.

    With a gaussian head the last layer has ``2 * layer_sizes[-1]`` outputs:
    the first half are action means, the second half raw log-stds.
    """

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_activation: str = "tanh"
    output_head: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "weights", tuple(_frozen(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(_frozen(b) for b in self.biases))
        _check_structure(self)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def action_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def with_arrays(self, weights, biases) -> "MlpParams":
        return MlpParams(self.layer_sizes, tuple(weights), tuple(biases),
                         self.hidden_activation, self.output_head)

    def same_values(self, other: "MlpParams") -> bool:
        return (self.layer_sizes == other.layer_sizes
                and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())))

    def max_abs_diff(self, other: "MlpParams") -> float:
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.arrays(), other.arrays()))


@dataclass(frozen=True, eq=False)
class Gradient:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(_frozen(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(_frozen(b) for b in self.biases))

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def _map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Gradient":
        return Gradient(tuple(fn(w) for w in self.weights), tuple(fn(b) for b in self.biases))

    def scale(self, c: float) -> "Gradient":
        return self._map(lambda a: a * c)

    def __add__(self, other: "Gradient") -> "Gradient":
        _require_same_shapes(self, other)
        return Gradient(tuple(a + b for a, b in zip(self.weights, other.weights)),
                        tuple(a + b for a, b in zip(self.biases, other.biases)))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def norm(self) -> float:
        return float(math.sqrt(sum(float(np.sum(a * a)) for a in self.arrays())))

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a))) for a in self.arrays())

    def matches(self, params: MlpParams) -> bool:
        return all(g.shape == p.shape for g, p in zip(self.arrays(), params.arrays())) \
            and len(self.weights) == len(params.weights)


def zeros_like(params: MlpParams) -> Gradient:
    return Gradient(tuple(np.zeros_like(w) for w in params.weights),
                    tuple(np.zeros_like(b) for b in params.biases))


def _require_same_shapes(a, b):
    sa = [x.shape for x in a.arrays()]
    sb = [x.shape for x in b.arrays()]
    if sa != sb:
        raise ShapeError(f"shape mismatch: {sa} vs {sb}")


def _check_structure(p: MlpParams):
    if len(p.layer_sizes) < 2 or any(s < 1 for s in p.layer_sizes):
        raise ConfigurationError(f"bad layer_sizes {p.layer_sizes}")
    if p.hidden_activation not in ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {p.hidden_activation!r}")
    if p.output_head not in HEADS:
        raise ConfigurationError(f"unknown output head {p.output_head!r}")
    n = len(p.layer_sizes) - 1
    if len(p.weights) != n or len(p.biases) != n:
        raise ShapeError("layer count does not match layer_sizes")
    for i in range(n):
        out = p.layer_sizes[i + 1]
        if i == n - 1 and p.output_head == "gaussian":
            out *= 2
        if p.weights[i].shape != (out, p.layer_sizes[i]) or p.biases[i].shape != (out,):
            raise ShapeError(f"layer {i}: weight {p.weights[i].shape}, bias {p.biases[i].shape}")
    for a in p.arrays():
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite parameter value")


def init_network(layer_sizes: Sequence[int], hidden_activation: str = "tanh",
                 output_head: str = "linear", seed: int = 0) -> MlpParams:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ConfigurationError("layer_sizes needs at least an input and an output size")
    if any(int(s) < 1 for s in sizes):
        raise ConfigurationError(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        fan_in, out = sizes[i], sizes[i + 1]
        if i == len(sizes) - 2 and output_head == "gaussian":
            out *= 2
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(out, fan_in)))
        biases.append(np.zeros(out))
    return MlpParams(tuple(sizes), tuple(weights), tuple(biases), hidden_activation, output_head)


def zero_network(layer_sizes, hidden_activation="tanh", output_head="linear") -> MlpParams:
    p = init_network(layer_sizes, hidden_activation, output_head, seed=0)
    return p.with_arrays([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])


@dataclass(frozen=True)
class ForwardCache:
    inputs: tuple[np.ndarray, ...]   # input to each layer
    pre: tuple[np.ndarray, ...]      # pre-activation of each layer
    layer_sizes: tuple[int, ...]


def _act(name, z):
    return np.tanh(z) if name == "tanh" else np.maximum(z, 0.0)


def _act_grad(name, z, a):
    return 1.0 - a * a if name == "tanh" else (z > 0.0).astype(np.float64)


def forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != params.input_dim:
        raise ShapeError(f"input width {x.shape[1]} != {params.input_dim}")
    inputs, pre = [], []
    a = x
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(a)
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else _act(params.hidden_activation, z)
    return a, ForwardCache(tuple(inputs), tuple(pre), params.layer_sizes)


def predict(params: MlpParams, x) -> np.ndarray:
    return forward(params, x)[0]


def backward(params: MlpParams, cache: ForwardCache, upstream, return_input_grad: bool = False):
    """Gradient of ``sum(output * upstream)`` w.r.t. the parameters.

    The upstream array has the same shape as the raw network output.  With
    ``return_input_grad`` the gradient w.r.t. the input batch is returned too.
    """
    if cache.layer_sizes != params.layer_sizes or len(cache.pre) != params.n_layers:
        raise ShapeError("cache does not belong to these parameters")
    g = np.asarray(upstream, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ShapeError(f"upstream shape {g.shape} != output shape {cache.pre[-1].shape}")
    gw = [None] * params.n_layers
    gb = [None] * params.n_layers
    for i in reversed(range(params.n_layers)):
        if i != params.n_layers - 1:
            z = cache.pre[i]
            g = g * _act_grad(params.hidden_activation, z, cache.inputs[i + 1])
        gw[i] = g.T @ cache.inputs[i]
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i]
    grad = Gradient(tuple(gw), tuple(gb))
    return (grad, g) if return_input_grad else grad


# --- gaussian policy head -------------------------------------------------

def split_gaussian(raw: np.ndarray):
    """Means, clamped log-stds, and the mask where the clamp is inactive."""
    m = raw.shape[1] // 2
    mean = raw[:, :m]
    raw_ls = raw[:, m:]
    log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
    live = (raw_ls > LOG_STD_MIN) & (raw_ls < LOG_STD_MAX)
    return mean, log_std, live


def gaussian_log_density(mean, log_std, u) -> np.ndarray:
    z = (u - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - LOG_SQRT_2PI, axis=-1)


def squash_log_correction(u) -> np.ndarray:
    """Sum of log(1 - tanh(u)^2), computed without cancellation."""
    u = np.asarray(u, dtype=np.float64)
    return np.sum(2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u)), axis=-1)


def gaussian_head_sample(params: MlpParams, state, rng: np.random.Generator):
    """Draw ``u = mean + std * noise``; return ``(u, log N(u))`` per row."""
    if params.output_head != "gaussian":
        raise ConfigurationError("network has no gaussian head")
    raw, _ = forward(params, state)
    mean, log_std, _ = split_gaussian(raw)
    u = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return u, gaussian_log_density(mean, log_std, u)


def gaussian_log_prob(params: MlpParams, states, u):
    """Log-density of given pre-squash actions and the forward cache."""
    raw, cache = forward(params, states)
    mean, log_std, _ = split_gaussian(raw)
    return gaussian_log_density(mean, log_std, np.asarray(u, dtype=np.float64)), cache


def gaussian_log_prob_grad(params: MlpParams, states, u, coef) -> tuple[np.ndarray, Gradient]:
    """Gradient of ``sum_i coef_i * log N(u_i | mean(x_i), std(x_i))``."""
    raw, cache = forward(params, states)
    mean, log_std, live = split_gaussian(raw)
    u = np.asarray(u, dtype=np.float64).reshape(mean.shape)
    coef = np.asarray(coef, dtype=np.float64).reshape(-1, 1)
    inv_var = np.exp(-2.0 * log_std)
    d = u - mean
    d_mean = d * inv_var
    d_log_std = (d * d * inv_var - 1.0) * live
    up = np.concatenate([d_mean * coef, d_log_std * coef], axis=1)
    return gaussian_log_density(mean, log_std, u), backward(params, cache, up)


# --- updates ----------------------------------------------------------------

def sgd_apply(params: MlpParams, gradient: Gradient, learning_rate: float,
              direction: str = "descend") -> MlpParams:
    if direction not in ("ascend", "descend"):
        raise ConfigurationError(f"direction must be ascend or descend, got {direction!r}")
    if not gradient.matches(params):
        raise ShapeError("gradient shape does not match parameters")
    if not gradient.is_finite():
        raise ValueError("non-finite gradient")
    step = learning_rate if direction == "ascend" else -learning_rate
    return params.with_arrays([w + step * g for w, g in zip(params.weights, gradient.weights)],
                              [b + step * g for b, g in zip(params.biases, gradient.biases)])


def ema_blend(current: MlpParams, proposed: MlpParams, tau: float) -> MlpParams:
    """``tau * current + (1 - tau) * proposed``; tau = 1 keeps ``current``."""
    if not (0.0 < tau <= 1.0):
        raise ConfigurationError(f"tau must lie in (0, 1], got {tau}")
    _require_same_shapes(current, proposed)
    if tau == 1.0:
        return current
    return current.with_arrays(
        [tau * a + (1.0 - tau) * b for a, b in zip(current.weights, proposed.weights)],
        [tau * a + (1.0 - tau) * b for a, b in zip(current.biases, proposed.biases)])


class Sgd:
    """Plain gradient step, ``params +/- lr * g``."""

    def __init__(self, learning_rate: float):
        self.learning_rate = float(learning_rate)

    def step(self, params: MlpParams, gradient: Gradient, direction: str = "descend") -> MlpParams:
        return sgd_apply(params, gradient, self.learning_rate, direction)


class Adam:
    """Adam with bias correction; moment estimates live on the optimizer."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: MlpParams, gradient: Gradient, direction: str = "descend") -> MlpParams:
        if direction not in ("ascend", "descend"):
            raise ConfigurationError(f"direction must be ascend or descend, got {direction!r}")
        if not gradient.matches(params):
            raise ShapeError("gradient shape does not match parameters")
        if not gradient.is_finite():
            raise ValueError("non-finite gradient")
        grads = gradient.arrays()
        if self.m is None:
            self.m = [np.zeros_like(g) for g in grads]
            self.v = [np.zeros_like(g) for g in grads]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        sign = 1.0 if direction == "ascend" else -1.0
        new = []
        for i, (a, g) in enumerate(zip(params.arrays(), grads)):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            new.append(a + sign * self.learning_rate * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps))
        n = params.n_layers
        return params.with_arrays(new[:n], new[n:])


def make_optimizer(name: str, learning_rate: float):
    if name == "sgd":
        return Sgd(learning_rate)
    if name == "adam":
        return Adam(learning_rate)
    raise ConfigurationError(f"unknown optimizer {name!r}")


# --- snapshot files ---------------------------------------------------------

def params_to_rows(params: MlpParams) -> list[list]:
    rows = []
    for i, w in enumerate(params.weights):
        for r in range(w.shape[0]):
            for c in range(w.shape[1]):
                rows.append([i, "weight", r, c, float(w[r, c])])
    for i, b in enumerate(params.biases):
        for r in range(b.shape[0]):
            rows.append([i, "bias", r, 0, float(b[r])])
    return rows


def params_from_rows(layer_sizes, hidden_activation, output_head, rows) -> MlpParams:
    template = zero_network(layer_sizes, hidden_activation, output_head)
    weights = [np.zeros_like(w) for w in template.weights]
    biases = [np.zeros_like(b) for b in template.biases]
    for layer, kind, r, c, v in rows:
        if kind == "weight":
            weights[layer][r, c] = v
        elif kind == "bias":
            biases[layer][r] = v
        else:
            raise ValueError(f"unknown row kind {kind!r}")
    return template.with_arrays(weights, biases)


def save_snapshot(path, networks: Mapping[str, MlpParams], header: Mapping | None = None) -> None:
    """Write networks as JSON rows of (layer, kind, row, col, value).

    Python's float repr round-trips exactly, so the file is lossless.
    """
    payload = {"header": dict(header or {}), "networks": {}}
    for name, p in networks.items():
        payload["networks"][name] = {
            "layer_sizes": list(p.layer_sizes),
            "hidden_activation": p.hidden_activation,
            "output_head": p.output_head,
            "rows": params_to_rows(p),
        }
    Path(path).write_text(json.dumps(payload))


def load_snapshot(path) -> tuple[dict, dict[str, MlpParams]]:
    payload = json.loads(Path(path).read_text())
    nets = {name: params_from_rows(d["layer_sizes"], d["hidden_activation"], d["output_head"], d["rows"])
            for name, d in payload["networks"].items()}
    return payload["header"], nets
