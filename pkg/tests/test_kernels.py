"""Cross-check the compiled kernels against the numpy fallback."""

import numpy as np
import pytest

from mile import backend

from .conftest import random_instance

pytestmark = pytest.mark.skipif("cython" not in backend.available(), reason="compiled backend not built")


def _call(k, cfg, theta, data, want_grad=True):
    sizes = np.array(cfg.layer_sizes, dtype=np.int64)
    act = 0 if cfg.activation == "relu" else 1
    if cfg.task == "regression":
        return k.loss_grad(theta, data.X, data.y, np.zeros(0, np.int64), sizes, act, 0, 1e-3, want_grad)
    return k.loss_grad(theta, data.X, np.zeros((0, 0)), data.y, sizes, act, 1, 1e-3, want_grad)


def test_backends_agree(rng):
    py, cy = backend.load("python"), backend.load("cython")
    for _ in range(50):
        cfg, theta, data = random_instance(rng, max_d=400)
        r0, g0 = _call(py, cfg, theta, data)
        r1, g1 = _call(cy, cfg, theta, data)
        np.testing.assert_allclose(r1, r0, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(g1, g0, rtol=1e-10, atol=1e-12)
        sizes = np.array(cfg.layer_sizes, dtype=np.int64)
        act = 0 if cfg.activation == "relu" else 1
        np.testing.assert_allclose(cy.forward(theta, data.X, sizes, act), py.forward(theta, data.X, sizes, act),
                                   rtol=1e-13, atol=1e-13)


def test_no_gradient_requested(rng, kernels):
    cfg, theta, data = random_instance(rng)
    rows, grad = _call(kernels, cfg, theta, data, want_grad=False)
    assert grad is None and rows.shape == (data.n,)


def test_selection_env(monkeypatch):
    import importlib

    import mile.backend as b

    monkeypatch.setenv("MILE_BACKEND", "python")
    assert importlib.reload(b).NAME == "python"
    monkeypatch.setenv("MILE_BACKEND", "cython")
    assert importlib.reload(b).NAME == "cython"
    monkeypatch.delenv("MILE_BACKEND")
    assert importlib.reload(b).NAME == "cython"
