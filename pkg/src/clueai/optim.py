"""Adam optimizer and the training hyperparameter bundle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Parameter


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    learning_rate 0 is accepted as a degenerate no-op step (useful as a
    boundary case); negative rates are rejected.
    """
    learning_rate: float = 1e-4
    epochs: int = 40
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    class_weights: np.ndarray = field(default_factory=lambda: np.ones(7))

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1/beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        self.class_weights = np.asarray(self.class_weights, dtype=np.float64)
        if (self.class_weights <= 0).any():
            raise ConfigError("class weights must all be > 0")


class AdamState:
    """First/second moment buffers, keyed like the parameter list."""

    def __init__(self, params):
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params, grads, state: AdamState, config: TrainConfig, t: int):
    """One Adam update, in place on the parameter values.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """
    if t < 1:
        raise ConfigError(f"adam step index must be >= 1, got {t}")
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)


class Adam:
    """Stateful wrapper binding parameters to their Adam buffers.

    On construction the parameter values and gradients are re-homed into
    one flat buffer each (the Parameter objects keep views), so a step is
    a handful of vectorized passes instead of per-parameter numpy calls.
    A zero gradient still leaves the values bitwise unchanged.
    """

    def __init__(self, params: list[Parameter], config: TrainConfig):
        self.params = list(params)
        self.config = config
        self.t = 0
        dtypes = {p.dtype for p in self.params}
        if len(dtypes) > 1:
            raise DimensionError("all parameters must share one dtype")
        dtype = self.params[0].dtype if self.params else np.float32
        total = sum(p.data.size for p in self.params)
        self.theta = np.empty(total, dtype=dtype)
        self.gbuf = np.zeros(total, dtype=dtype)
        offset = 0
        for p in self.params:
            n = p.data.size
            self.theta[offset:offset + n] = p.data.reshape(-1)
            p.data = self.theta[offset:offset + n].reshape(p.data.shape)
            p.grad = self.gbuf[offset:offset + n].reshape(p.data.shape)
            offset += n
        self.m = np.zeros(total, dtype=dtype)
        self.v = np.zeros(total, dtype=dtype)
        self._scratch = np.empty(total, dtype=dtype)

    def zero_grad(self):
        self.gbuf.fill(0.0)

    def step(self):
        self.t += 1
        cfg = self.config
        g = self.gbuf
        self.m *= cfg.beta1
        self.m += (1.0 - cfg.beta1) * g
        self.v *= cfg.beta2
        self.v += (1.0 - cfg.beta2) * (g * g)
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        denom = np.sqrt(self.v / c2, out=self._scratch)
        denom += cfg.epsilon
        update = self.m / denom
        update *= cfg.learning_rate / c1
        self.theta -= update
