# Two-layer perceptron with hand-written backward pass
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from actnow.errors import ShapeMismatchError

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass
class MlpCache:
    x: np.ndarray
    z1: np.ndarray
    h: np.ndarray


class Mlp2:
    """x -> relu(x W1 + b1) W2 + b2, applied row-wise to an [n x d_in] input."""

    def __init__(self, d_in: int, hidden: int, d_out: int, params: dict[str, np.ndarray] | None = None):
        self.d_in = d_in
        self.hidden = hidden
        self.d_out = d_out
        self.params = params if params is not None else {
            "W1": np.zeros((d_in, hidden)),
            "b1": np.zeros(hidden),
            "W2": np.zeros((hidden, d_out)),
            "b2": np.zeros(d_out),
        }

    @classmethod
    def init(cls, d_in: int, hidden: int, d_out: int, rng: np.random.Generator) -> Mlp2:
        # weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero
        bound1 = 1.0 / np.sqrt(d_in)
        bound2 = 1.0 / np.sqrt(hidden)
        return cls(d_in, hidden, d_out, {
            "W1": rng.uniform(-bound1, bound1, size=(d_in, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.uniform(-bound2, bound2, size=(hidden, d_out)),
            "b2": np.zeros(d_out),
        })

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: self.params[name].shape for name in PARAM_NAMES}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeMismatchError(f"expected [n x {self.d_in}] input, got {x.shape}")
        z1 = x @ self.params["W1"] + self.params["b1"]
        h = np.maximum(z1, 0.0)
        out = h @ self.params["W2"] + self.params["b2"]
        return out, MlpCache(x=x, z1=z1, h=h)

    def backward(self, cache: MlpCache, g_out: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Parameter gradients and the gradient with respect to the input."""
        W2 = self.params["W2"]
        g_h = g_out @ W2.T
        g_z1 = g_h * (cache.z1 > 0)
        grads = {
            "W1": cache.x.T @ g_z1,
            "b1": g_z1.sum(axis=0),
            "W2": cache.h.T @ g_out,
            "b2": g_out.sum(axis=0),
        }
        return grads, g_z1 @ self.params["W1"].T

    def copy(self) -> Mlp2:
        return Mlp2(self.d_in, self.hidden, self.d_out, {k: v.copy() for k, v in self.params.items()})
