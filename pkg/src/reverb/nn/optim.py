"""Adam with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .layers import ParameterStore


class Adam:
    def __init__(self, store: ParameterStore, lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in store.items()}

    def step(self):
        """One update over every stored parameter; missing grads count as 0."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.store.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.isfinite(g).all():
                raise TrainingError(f"gradient of {name!r} contains NaN or Inf")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self) -> dict:
        out = {}
        for name in self.store.names():
            out[f"adam.m.{name}"] = self.m[name].copy()
            out[f"adam.v.{name}"] = self.v[name].copy()
        return out

    def load_arrays(self, arrays: dict, step_count: int):
        for name in self.store.names():
            self.m[name] = np.asarray(arrays[f"adam.m.{name}"], dtype=np.float64).copy()
            self.v[name] = np.asarray(arrays[f"adam.v.{name}"], dtype=np.float64).copy()
        self.step_count = int(step_count)
