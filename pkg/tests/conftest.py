import numpy as np
import pytest

from mile import backend
from mile.network import Dataset, NetworkConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=backend.available())
def kernels(request):
    return backend.load(request.param)


def random_instance(rng, task=None, max_d=100):
    """Random (config, theta, data) with at most ``max_d`` parameters."""
    while True:
        task = task or ("regression" if rng.random() < 0.6 else "classification")
        depth = int(rng.integers(0, 3))
        cfg = NetworkConfig(
            input_dim=int(rng.integers(1, 4)),
            hidden_layers=tuple(int(h) for h in rng.integers(1, 6, depth)),
            activation=str(rng.choice(["relu", "tanh"])),
            task=task,
            n_outputs=int(rng.integers(1, 3)) if task == "regression" else int(rng.integers(2, 4)),
        )
        if cfg.n_params <= max_d:
            break
    n = int(rng.integers(1, 21))
    X = rng.standard_normal((n, cfg.input_dim))
    if task == "regression":
        y = rng.standard_normal((n, cfg.n_outputs))
    else:
        y = rng.integers(0, cfg.n_outputs, n)
    theta = 0.7 * rng.standard_normal(cfg.n_params)
    return cfg, theta, Dataset(X, y, task)


def central_difference(f, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    results = getattr(test_acceptance, "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
