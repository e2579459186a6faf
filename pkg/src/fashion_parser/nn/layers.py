"""Dropout, dense projection and embedding-table helpers."""

from __future__ import annotations

import numpy as np


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def dropout(inputs, rate: float, seed=None, training: bool = True):
    """Inverted dropout.  Returns (outputs, mask); mask is None when inactive."""
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must lie in [0, 1)")
    x = np.asarray(inputs, dtype=np.float64)
    if not training or rate == 0:
        return x, None
    keep = _rng(seed).random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    """Affine map ``y = x W + b`` over the last axis."""

    def __init__(self, W: np.ndarray, b: np.ndarray):
        self.W = W
        self.b = b

    @classmethod
    def init(cls, d_in: int, d_out: int, rng: np.random.Generator) -> "Linear":
        return cls(glorot_uniform(d_in, d_out, rng), np.zeros(d_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.W + self.b

    def backward(self, x: np.ndarray, d_out: np.ndarray):
        """Returns (dW, db, dx) for upstream gradient ``d_out``."""
        flat_x = x.reshape(-1, x.shape[-1])
        flat_d = d_out.reshape(-1, d_out.shape[-1])
        return flat_x.T @ flat_d, flat_d.sum(axis=0), d_out @ self.W.T

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}
