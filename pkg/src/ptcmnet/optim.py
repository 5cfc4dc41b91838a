"""First-order optimizers and learning-rate schedules.

Optimizers update a dict of named arrays in place.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

SCHEDULES = ("constant", "inverse_time", "exponential", "cosine")
OPTIMIZERS = ("sgd", "adam", "rmsprop")


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd"
    lr0: float = 0.01
    schedule: str = "inverse_time"
    decay_rate: float = 0.75
    decay_steps: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.kind!r}; choose from {OPTIMIZERS}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; choose from {SCHEDULES}")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if self.decay_steps < 1:
            raise ValueError("decay_steps must be at least 1")

    def to_dict(self):
        return asdict(self)


def lr_at(config: OptimizerConfig, step: int) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    lr0, rate, steps = config.lr0, config.decay_rate, config.decay_steps
    if config.schedule == "inverse_time":
        return lr0 / (1.0 + rate * step / steps)
    if config.schedule == "exponential":
        return lr0 * rate ** (step / steps)
    if config.schedule == "cosine":
        return lr0 * 0.5 * (1.0 + math.cos(math.pi * min(step, steps) / steps))
    return lr0


class SGD:
    def __init__(self, config: OptimizerConfig):
        self.config = config

    def step(self, params: dict, grads: dict, lr: float):
        _check_finite(grads)
        for name, g in grads.items():
            params[name] -= lr * g


class Adam:
    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict, lr: float):
        _check_finite(grads)
        c = self.config
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


class RMSprop:
    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.v = {}

    def step(self, params: dict, grads: dict, lr: float):
        _check_finite(grads)
        c = self.config
        for name, g in grads.items():
            v = self.v.setdefault(name, np.zeros_like(g))
            v *= c.rho
            v += (1 - c.rho) * g * g
            params[name] -= lr * g / (np.sqrt(v) + c.eps)


def make_optimizer(config: OptimizerConfig):
    return {"sgd": SGD, "adam": Adam, "rmsprop": RMSprop}[config.kind](config)


def _check_finite(grads):
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {name!r}")
