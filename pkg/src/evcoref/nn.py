"""Feed-forward scorers, dropout, the Adamax optimizer, and the
finite-difference gradient oracle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autograd import (
    NumericError, Parameter, Tensor, matmul, mul, relu, reshape, trace_discrete,
)

# Table-aligned defaults: two rectified hidden layers of 150 units,
# dropout 0.2 on hidden activations.
@dataclass(frozen=True)
class FFNNConfig:
    input_dim: int
    hidden_layers: int = 2
    hidden_units: int = 150
    output_dim: int = 1
    dropout: float = 0.2


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Uniform in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


def dropout_mask(shape, rate: float, seed) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def apply_dropout(t: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    return mul(t, Tensor(dropout_mask(t.shape, rate, rng)))


class FeedForward:
    """Rectified multi-layer scorer with a linear output layer.

    Input is a (batch, input_dim) tensor; with output_dim 1 the result is
    squeezed to (batch,). Hidden activations get inverted dropout only
    when ``training`` is set and an rng is supplied.
    """

    def __init__(self, name: str, config: FFNNConfig, rng: np.random.Generator | None = None):
        self.name = name
        self.config = config
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        widths = [config.input_dim] + [config.hidden_units] * config.hidden_layers
        for k in range(config.hidden_layers):
            self.weights.append(Parameter(
                f"{name}.w{k}",
                glorot(rng, widths[k], widths[k + 1]) if rng is not None
                else np.zeros((widths[k], widths[k + 1])),
            ))
            self.biases.append(Parameter(f"{name}.b{k}", np.zeros(widths[k + 1])))
        self.out_weight = Parameter(
            f"{name}.w_out",
            glorot(rng, widths[-1], config.output_dim) if rng is not None
            else np.zeros((widths[-1], config.output_dim)),
        )
        self.out_bias = Parameter(f"{name}.b_out", np.zeros(config.output_dim))

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        params.extend((self.out_weight, self.out_bias))
        return params

    def __call__(self, x: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ValueError(
                f"{self.name}: expected input of width {self.config.input_dim}, "
                f"got shape {x.shape}"
            )
        h = x
        for w, b in zip(self.weights, self.biases):
            h = relu(matmul(h, w) + b)
            if training and self.config.dropout > 0.0 and rng is not None:
                h = apply_dropout(h, self.config.dropout, rng)
        out = matmul(h, self.out_weight) + self.out_bias
        if self.config.output_dim == 1:
            return reshape(out, (x.shape[0],))
        return out


def ffnn_forward(ffnn: FeedForward, x, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
    """Score a single vector; returns a scalar tensor."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    out = ffnn(reshape(x, (1, x.size)), training=training, rng=rng)
    return reshape(out, ())


class Adamax:
    """Adamax with bias correction; a plain minimizer.

    The training objective is maximized by backpropagating its negation,
    so a step moves parameters in the objective's ascent direction.
    ``u`` is elementwise non-decreasing across steps by construction.
    """

    def __init__(self, params: Sequence[Parameter], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in params}
        self.u = {p.name: np.zeros_like(p.data) for p in params}

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        correction = 1.0 - self.beta1 ** self.t
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[p.name]
            u = self.u[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            np.maximum(self.beta2 * u, np.abs(g), out=u)
            p.data -= (self.lr / correction) * m / (u + self.eps)
            if not np.all(np.isfinite(p.data)):
                raise NumericError(f"non-finite value in parameter {p.name!r} after step")

    def state_dict(self) -> dict:
        return {
            "t": self.t, "lr": self.lr, "beta1": self.beta1,
            "beta2": self.beta2, "eps": self.eps,
            "m": {k: v.copy() for k, v in self.m.items()},
            "u": {k: v.copy() for k, v in self.u.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.lr = float(state["lr"])
        self.beta1 = float(state["beta1"])
        self.beta2 = float(state["beta2"])
        self.eps = float(state["eps"])
        for name in self.m:
            self.m[name][...] = state["m"][name]
            self.u[name][...] = state["u"][name]


def adamax_step(optimizer: Adamax) -> None:
    """One optimizer step from the gradients currently on the parameters."""
    optimizer.step()


def _traced_value(objective: Callable[[], Tensor]) -> tuple[float, list[np.ndarray]]:
    trace: list[np.ndarray] = []
    with trace_discrete(trace):
        value = float(objective().data)
    return value, trace


def _same_trace(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def finite_difference_check(objective: Callable[[], Tensor],
                            params: Sequence[Parameter],
                            h: float = 1e-4,
                            max_coords: int = 200,
                            seed: int = 0) -> float:
    """Compare analytic gradients with central differences.

    ``objective`` must be deterministic (dropout disabled). Tensors larger
    than ``max_coords`` are probed on a seeded sample of coordinates. A
    probe whose +/-h evaluations disagree on any discrete forward decision
    (a rectifier sign, a clip boundary, a pruning choice) straddles a
    kink, where the central difference is meaningless; such coordinates
    are excluded. Returns the worst relative error over the rest, with a
    1e-3 floor on the comparison scale so negligible coordinates cannot
    dominate.
    """
    for p in params:
        p.zero_grad()
    objective().backward()
    analytic = {p.name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for p in params}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        grads = analytic[p.name].reshape(-1)
        if flat.size <= max_coords:
            coords = np.arange(flat.size)
        else:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for c in coords:
            original = flat[c]
            flat[c] = original + h
            above, trace_above = _traced_value(objective)
            flat[c] = original - h
            below, trace_below = _traced_value(objective)
            flat[c] = original
            if not _same_trace(trace_above, trace_below):
                continue
            numeric = (above - below) / (2.0 * h)
            scale = max(abs(grads[c]), abs(numeric), 1e-3)
            worst = max(worst, abs(grads[c] - numeric) / scale)
    return worst
