import numpy as np
import pytest

from echobench.autodiff import Tape


def finite_difference(loss_fn, params, h=1e-5):
    """Central-difference gradients of loss_fn() w.r.t. every entry of
    every parameter tensor (mutates values in place, then restores)."""
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def autodiff_gradients(build_loss, params):
    """Gradients by one reverse sweep; build_loss() returns the loss tensor."""
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = build_loss()
        tape.backward(loss)
    out = [p.grad.copy() if p.grad is not None else np.zeros_like(p.value)
           for p in params]
    for p in params:
        p.grad = None
    return out


def assert_grads_close(analytic, numeric, rel=1e-6, floor=1e-3):
    """Relative comparison with an absolute floor for near-zero entries.

    Central differences at h=1e-5 on a loss of magnitude L carry about
    L * eps / h ~ 1e-11 * L absolute noise, so entries below the floor are
    effectively compared absolutely at floor*rel; wrong-gradient bugs show
    up as O(1) relative errors at every magnitude either way.
    """
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        err = np.abs(a - n) / denom
        assert err.max() < rel, f"gradient mismatch: max rel err {err.max():.3e}"


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path / "out"
