"""Adam and gradient centralisation."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .diffcore import Tensor


class Adam:
    """Bias-corrected Adam updating tensors in place from their ``.grad``."""

    def __init__(self, params: Iterable[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        missing = [i for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise ValueError(f"Adam.step: parameter(s) {missing} have no gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def centralize_gradients(params: Iterable[Tensor], axis: int = 0) -> None:
    """Subtract the mean of each matrix gradient along ``axis``, in place.

    Only gradients with both dimensions > 1 are touched; rows/columns
    (biases, BN scales) pass through unchanged.
    """
    for p in params:
        g = p.grad
        if g is None or g.ndim != 2 or min(g.shape) < 2:
            continue
        p.grad = g - g.mean(axis=axis, keepdims=True)
