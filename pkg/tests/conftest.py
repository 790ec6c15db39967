import numpy as np
import pytest

from avclab import autodiff as ad
from avclab import gradcheck


@pytest.fixture(autouse=True)
def clean_tape():
    ad.active_graph().clear()
    ad.active_graph().recording = True
    yield
    ad.active_graph().clear()


def rand64(shape, seed, lo=-1.0, hi=1.0):
    gen = np.random.Generator(np.random.PCG64(seed))
    return gen.uniform(lo, hi, size=shape).astype(np.float64)


def rand_away_from_zero(shape, seed, margin=0.1):
    """Uniform in [-1,1] with |x| >= margin, safe for ReLU finite differences."""
    x = rand64(shape, seed)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin + x, x)


def assert_grads_match(build_loss, tensors, tol=1e-5, h=gradcheck.DEFAULT_STEP):
    errors = gradcheck.check_gradients(build_loss, tensors, h=h)
    worst = max(errors.values())
    assert worst < tol, f"gradient mismatch: {errors}"
    return errors
