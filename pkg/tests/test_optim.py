import math

import numpy as np
import pytest

from avclab import autodiff as ad
from avclab.autodiff import Tensor
from avclab.errors import ContractError
from avclab.optim import Adam


def scalar_param(value):
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=True, name="w")


def quadratic_loss(p):
    return ad.sse_loss(p, Tensor(np.asarray(0.0, dtype=np.float64)))


def reference_adam(w0, grad_fn, lr, beta1, beta2, eps, weight_decay, steps):
    """Plain-float Adam on a scalar, independent of the tensor engine."""
    w, m, v = w0, 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad_fn(w) + weight_decay * w
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        w = w - lr * m_hat / (math.sqrt(v_hat) + eps)
    return w


class TestAdam:
    def test_first_step_is_lr_times_sign(self):
        p = scalar_param(1.0)
        opt = Adam([p], lr=0.1)
        ad.backward(quadratic_loss(p))
        opt.step()
        assert float(p.data) == pytest.approx(0.9, abs=1e-7)

    def test_zero_gradient_keeps_parameter(self):
        p = scalar_param(0.75)
        p.grad = np.zeros_like(p.data)
        Adam([p], lr=0.1, weight_decay=0.0).step()
        assert float(p.data) == 0.75

    def test_five_steps_match_scalar_reference_bitwise(self):
        lr, wd = 0.05, 1e-4
        p = scalar_param(1.5)
        opt = Adam([p], lr=lr, weight_decay=wd)
        for _ in range(5):
            ad.backward(quadratic_loss(p))
            opt.step()
        expect = reference_adam(1.5, lambda w: 2.0 * w, lr, 0.9, 0.999, 1e-8, wd, 5)
        assert float(p.data) == expect  # exact: same IEEE-754 operations

    def test_weight_decay_moves_parameter_with_zero_grad(self):
        p = scalar_param(1.0)
        p.grad = np.zeros_like(p.data)
        Adam([p], lr=0.1, weight_decay=0.1).step()
        assert float(p.data) < 1.0

    def test_gradients_cleared_after_step(self):
        p = scalar_param(1.0)
        ad.backward(quadratic_loss(p))
        opt = Adam([p], lr=0.1)
        opt.step()
        assert p.grad is None

    def test_missing_grad_rejected(self):
        p = scalar_param(1.0)
        with pytest.raises(ContractError):
            Adam([p], lr=0.1).step()

    def test_step_counter_increments(self):
        p = scalar_param(1.0)
        opt = Adam([p], lr=0.01)
        for expected in (1, 2, 3):
            ad.backward(quadratic_loss(p))
            opt.step()
            assert opt.t == expected

    def test_converges_on_quadratic(self):
        p = scalar_param(2.0)
        opt = Adam([p], lr=0.1)
        for _ in range(200):
            ad.backward(quadratic_loss(p))
            opt.step()
        assert abs(float(p.data)) < 1e-2
