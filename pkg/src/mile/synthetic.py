"""Synthetic regression problems with known generative noise."""

import numpy as np

from .errors import ConfigError
from .network import Dataset

GENERATORS = ("linear", "sine", "friedman")


def sine_noise_std(x):
    """Noise std of the heteroscedastic sine problem at inputs ``x``."""
    return 0.05 + 0.25 * np.abs(x) / 3.0


def make_linear(n, rng):
    X = rng.standard_normal((n, 3))
    y = X @ np.array([1.5, -2.0, 0.5]) + 0.5 + 0.3 * rng.standard_normal(n)
    return X, y


def make_sine(n, rng):
    x = rng.uniform(-3.0, 3.0, n)
    y = np.sin(x) + sine_noise_std(x) * rng.standard_normal(n)
    return x[:, None], y


def make_friedman(n, rng):
    X = rng.uniform(0.0, 1.0, (n, 5))
    y = (
        10 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20 * (X[:, 2] - 0.5) ** 2
        + 10 * X[:, 3]
        + 5 * X[:, 4]
        + rng.standard_normal(n)
    )
    return X, y


_MAKERS = {"linear": make_linear, "sine": make_sine, "friedman": make_friedman}


def make_dataset(name, n, seed):
    """Draw ``n`` rows of problem ``name`` as a regression :class:`Dataset`."""
    if name not in _MAKERS:
        raise ConfigError(f"unknown synthetic problem {name!r}; choose from {GENERATORS}")
    X, y = _MAKERS[name](n, np.random.default_rng(seed))
    return Dataset(X, y, "regression")


def train_test(name, n_train, n_test, seed):
    data = make_dataset(name, n_train + n_test, seed)
    return data.subset(slice(0, n_train)), data.subset(slice(n_train, None))
