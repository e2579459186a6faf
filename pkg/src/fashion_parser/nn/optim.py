"""RMSprop: scale each step by a running root-mean-square of the gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RmspropState:
    cache: np.ndarray
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8

    @classmethod
    def like(cls, param: np.ndarray, **kw) -> "RmspropState":
        return cls(np.zeros_like(param, dtype=np.float64), **kw)


def rmsprop_step(param: np.ndarray, grad: np.ndarray, state: RmspropState) -> np.ndarray:
    """Update ``param`` in place and return it."""
    if param.shape != grad.shape:
        raise ValueError(f"parameter shape {param.shape} != gradient shape {grad.shape}")
    state.cache *= state.rho
    state.cache += (1.0 - state.rho) * grad * grad
    param -= state.lr * grad / (np.sqrt(state.cache) + state.eps)
    return param


@dataclass
class RMSprop:
    """Keeps one RmspropState per named parameter."""

    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    clip_norm: float | None = None
    states: dict[str, RmspropState] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        if self.clip_norm is not None:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
                grads = {k: g * scale for k, g in grads.items()}
        for name, grad in grads.items():
            state = self.states.get(name)
            if state is None:
                state = self.states[name] = RmspropState.like(params[name], lr=self.lr, rho=self.rho, eps=self.eps)
            rmsprop_step(params[name], grad, state)
