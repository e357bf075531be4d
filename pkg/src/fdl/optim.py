"""Adam optimizer and weight initialization."""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter
from .errors import ConfigError

__all__ = ["Adam", "xavier_uniform_init", "xavier_bound"]


class Adam:
    """Adaptive moment estimation with bias-corrected first and second
    moments.  The learning rate is passed per step so schedules stay
    outside the optimizer."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.trainable]
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self, lr):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1**self.t)
            v_hat = self.v[i] / (1.0 - self.beta2**self.t)
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def xavier_bound(shape) -> float:
    """Half-width of the uniform initialization interval for a kernel shape."""
    rows, cols, kv, kh = shape
    fan_in = cols * kv * kh
    fan_out = rows * kv * kh
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def xavier_uniform_init(shape, rng) -> np.ndarray:
    """Draw a kernel i.i.d. uniform on [-a, a] with the fan-balanced bound.

    ``rng`` may be a seed or a ``numpy.random.Generator``; the same seed
    always yields the same tensor.
    """
    if len(shape) != 4:
        raise ConfigError(f"expected a 4-D kernel shape, got {shape}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    a = xavier_bound(shape)
    return rng.uniform(-a, a, size=shape)
