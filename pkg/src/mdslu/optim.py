"""Adam optimizer over named parameter tensors."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor


class Adam:
    """Bias-corrected Adam with the standard defaults.

    step() applies one update and clears gradients back to zero buffers.
    When every gradient is exactly zero the step is skipped entirely
    (no moment update, no step-count increment), so an all-zero objective
    leaves parameters untouched.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def ensure_grad_buffers(self) -> None:
        """Give every parameter a zero gradient buffer if it has none."""
        for p in self.params.values():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = np.zeros_like(p.data)

    def step(self) -> bool:
        """Apply one Adam update; returns False when skipped (all-zero grads)."""
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"parameter '{name}' has no gradient; run backward first")
        if all(not p.grad.any() for p in self.params.values()):
            self.zero_grads()
            return False
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.zero_grads()
        return True


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm
