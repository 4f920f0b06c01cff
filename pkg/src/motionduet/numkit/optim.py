"""Adam optimizer over named Params."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .tensor import Param


class Adam:
    def __init__(
        self,
        params: Iterable[Param],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("param names must be unique")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for p in self.params:
            g = p.grad
            if g is None:
                continue
            m = self.m[p.name]
            v = self.v[p.name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    # -- state for checkpoints -------------------------------------------

    def state_arrays(self) -> dict:
        out: dict = {"adam.step": np.array([float(self.step_count)])}
        for name in sorted(self.m):
            out[f"adam.m.{name}"] = self.m[name]
            out[f"adam.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        self.step_count = int(arrays["adam.step"][0])
        for p in self.params:
            self.m[p.name] = np.array(arrays[f"adam.m.{p.name}"], dtype=np.float64)
            self.v[p.name] = np.array(arrays[f"adam.v.{p.name}"], dtype=np.float64)
