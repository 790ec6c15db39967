"""Adam optimizer with gradient-coupled (classic L2) weight decay."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import ContractError


class Adam:
    """Per-parameter first/second moment state plus a shared step counter.

    Weight decay is added to the raw gradient before the moment updates
    (classic Adam-with-L2, not decoupled). ``step`` clears gradients.
    """

    def __init__(self, params: list[Tensor], lr: float = 1e-5, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p in self.params:
            if p.grad is None:
                name = p.name or "<unnamed>"
                raise ContractError(f"Adam.step: parameter {name} has no gradient")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad = None

    def zero_grad(self):
        for p in self.params:
            p.grad = None
