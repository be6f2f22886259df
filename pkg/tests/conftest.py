import numpy as np
import pytest

from noisylink import autodiff as ad


def numeric_grad(f, x0, h=1e-5):
    """Central finite differences of a scalar function of a flat array."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    flat = x0.reshape(-1)
    gf = g.reshape(-1)
    for k in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[k] += h
        xm[k] -= h
        gf[k] = (f(xp.reshape(x0.shape)) - f(xm.reshape(x0.shape))) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.max(np.abs(a - b) / (np.abs(b) + floor))


def check_grad(build, x0, tol=1e-4, h=1e-5):
    """Compare tape gradients against finite differences.

    ``build`` maps a value array to a scalar Tensor through a leaf created
    inside; it must return (loss, leaf).
    """
    loss, leaf = build(np.asarray(x0, dtype=np.float64))
    loss.backward()
    fd = numeric_grad(lambda v: build(v)[0].item(), x0, h=h)
    assert leaf.grad is not None
    err = rel_err(leaf.grad, fd)
    assert err < tol, f"gradient mismatch: rel err {err}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
