import numpy as np

from mile.data import StandardizationStats
from mile.ensemble import PosteriorEnsemble
from mile.network import NetworkConfig


def head_ensemble(mu, raw_scale):
    """Ensemble of bias-only linear nets: sample s predicts (mu[s], softplus(raw_scale[s]) + 1e-3)."""
    mu, raw_scale = np.atleast_1d(mu).astype(float), np.atleast_1d(raw_scale).astype(float)
    net = NetworkConfig(input_dim=1, hidden_layers=(), n_outputs=1)
    samples = np.zeros((mu.size, net.n_params))
    samples[:, 2] = mu
    samples[:, 3] = raw_scale
    stats = StandardizationStats([0.0], [1.0], [0.0], [1.0])
    return PosteriorEnsemble(samples, net, stats)


def raw_for_sigma(sigma):
    """Raw head value giving exactly ``sigma`` (needs sigma > 1e-3)."""
    return np.log(np.expm1(np.asarray(sigma, dtype=float) - 1e-3))


def random_ensemble(rng, task="regression", S=5, n_outputs=1, input_dim=2, y_shift=0.0, y_scale=1.0):
    net = NetworkConfig(input_dim=input_dim, hidden_layers=(4,), task=task, n_outputs=n_outputs)
    samples = rng.standard_normal((S, net.n_params))
    if task == "regression":
        stats = StandardizationStats(rng.standard_normal(input_dim), rng.uniform(0.5, 2, input_dim),
                                     np.full(n_outputs, y_shift), np.full(n_outputs, y_scale))
    else:
        stats = StandardizationStats(np.zeros(input_dim), np.ones(input_dim))
    return PosteriorEnsemble(samples, net, stats)
