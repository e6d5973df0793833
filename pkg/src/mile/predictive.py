"""Posterior-predictive quantities over a :class:`~mile.ensemble.PosteriorEnsemble`.

Every regression output is in original target units. The predictive
distribution at a point is the equal-weight mixture of the per-sample
Gaussians ``N(mu_s, sigma_s^2)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .errors import ConfigError, ShapeError, TaskMismatchError
from .network import decode_gaussian_head, forward, softmax

QUANTILE_TOL = 1e-8
SIGMA_HAT_MIN = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PredictionResult:
    means: np.ndarray = None
    stds: np.ndarray = None
    quantiles: dict = None
    raw: np.ndarray = None


def _require(ens, task):
    if ens.net.task != task:
        raise TaskMismatchError(f"operation needs a {task} model, this one is {ens.net.task}")


def _raw_outputs(ens, X):
    """Forward every sample; returns ``S x n x width`` in standardized units."""
    Xs = ens.standardization.transform_X(X)
    if Xs.shape[0] == 0:
        raise ShapeError("X has no rows")
    return np.stack([forward(ens.net, theta, Xs) for theta in ens.samples])


def _mixture_params(ens, X):
    _require(ens, "regression")
    mu, sigma = decode_gaussian_head(_raw_outputs(ens, X))
    st = ens.standardization
    return st.inverse_y(mu), sigma * st.y_scale


def predict_raw(ens, X):
    """Per-sample predictions, ``S x n x 2t`` (mu then sigma) or ``S x n x k`` probabilities."""
    if ens.net.task == "regression":
        mu, sigma = _mixture_params(ens, X)
        return np.concatenate([mu, sigma], axis=-1)
    return softmax(_raw_outputs(ens, X))


def mixture_moments(mu, sigma):
    """Mean and std of the equal-weight mixture along axis 0 (two-pass)."""
    mean = mu.mean(axis=0)
    var = np.mean(sigma**2, axis=0) + np.mean((mu - mean) ** 2, axis=0)
    return mean, np.sqrt(var)


def mixture_cdf(y, mu, sigma):
    return ndtr((y - mu) / sigma).mean(axis=0)


def mixture_quantiles(mu, sigma, levels, tol=QUANTILE_TOL):
    """Invert the mixture CDF by bisection, elementwise over the trailing axes.

    Returns an array of shape ``(len(levels),) + mu.shape[1:]``.
    """
    levels = np.asarray(levels, dtype=np.float64).ravel()
    if levels.size == 0 or not np.all((levels > 0) & (levels < 1)):
        raise ConfigError("quantile levels must lie strictly inside (0, 1)")
    smax = sigma.max(axis=0)
    lo0 = mu.min(axis=0) - 10.0 * smax
    hi0 = mu.max(axis=0) + 10.0 * smax
    out = np.empty((levels.size,) + mu.shape[1:])
    for i, level in enumerate(levels):
        lo, hi = lo0.copy(), hi0.copy()
        n_iter = int(np.ceil(np.log2(max(np.max(hi - lo), tol) / tol))) + 1
        for _ in range(n_iter):
            mid = 0.5 * (lo + hi)
            below = mixture_cdf(mid, mu, sigma) < level
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[i] = 0.5 * (lo + hi)
    return out


def predict_moments(ens, X):
    """Predictive mean and std (law of total variance), each ``n x t``."""
    return mixture_moments(*_mixture_params(ens, X))


def predict_quantiles(ens, X, levels):
    """Mixture quantiles; returns ``{level: n x t}``."""
    q = mixture_quantiles(*_mixture_params(ens, X), levels)
    return {float(level): q[i] for i, level in enumerate(np.ravel(levels))}


def predict_proba(ens, X):
    _require(ens, "classification")
    return softmax(_raw_outputs(ens, X)).mean(axis=0)


def predict_class(ens, X):
    """Most probable class index; ``argmax`` picks the lowest index on ties."""
    return np.argmax(predict_proba(ens, X), axis=1)


def predict(ens, X, mean_and_std=False, credible_intervals=None, raw=False):
    """Bundle the requested predictive summaries into a :class:`PredictionResult`."""
    means = stds = quantiles = raw_out = None
    if ens.net.task == "regression":
        mu, sigma = _mixture_params(ens, X)
        means, stds = mixture_moments(mu, sigma)
        if credible_intervals is not None:
            q = mixture_quantiles(mu, sigma, credible_intervals)
            quantiles = {float(lv): q[i] for i, lv in enumerate(np.ravel(credible_intervals))}
        if raw:
            raw_out = np.concatenate([mu, sigma], axis=-1)
    else:
        if credible_intervals is not None:
            raise TaskMismatchError("credible intervals need a regression model")
        probs = softmax(_raw_outputs(ens, X))
        means = probs.mean(axis=0)
        if raw:
            raw_out = probs
    if not mean_and_std:
        stds = None
    return PredictionResult(means, stds, quantiles, raw_out)


def _as_targets(y, shape):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1 and len(shape) == 2:
        y = y.reshape(-1, 1)
    if y.shape != shape:
        raise ShapeError(f"targets have shape {y.shape}, expected {shape}")
    return y


def metric_rmse(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(y_true.shape)
    if y_true.size == 0:
        raise ShapeError("empty input")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def metric_nll_mean_regression(y_true, y_pred):
    """Gaussian NLL with a homoscedastic plug-in scale equal to the RMSE (floored at 1e-6)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(y_true.shape)
    s = max(metric_rmse(y_true, y_pred), SIGMA_HAT_MIN)
    return float(np.mean(_HALF_LOG_2PI + np.log(s) + 0.5 * ((y_true - y_pred) / s) ** 2))


def mixture_log_density(y, mu, sigma):
    """``log (1/S) sum_s N(y | mu_s, sigma_s^2)`` jointly over trailing target columns."""
    z = (y - mu) / sigma
    comp = -(_HALF_LOG_2PI + np.log(sigma) + 0.5 * z**2).sum(axis=-1)
    return logsumexp(comp, axis=0) - math.log(mu.shape[0])


def metric_nll_distributional(ens, X, y):
    """Mean negative log predictive density of the posterior mixture."""
    if ens.net.task == "regression":
        mu, sigma = _mixture_params(ens, X)
        y = _as_targets(y, mu.shape[1:])
        return float(-np.mean(mixture_log_density(y, mu, sigma)))
    probs = predict_proba(ens, X)
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (probs.shape[0],):
        raise ShapeError("labels must be a vector with one entry per row")
    return float(-np.mean(np.log(probs[np.arange(y.size), y])))


def metric_coverage(ens, X, y, interval=(0.1, 0.9)):
    """Fraction of targets inside the central credible interval ``[q_lo, q_hi]``."""
    lo, hi = interval
    if not lo < hi:
        raise ConfigError("interval needs lo < hi")
    mu, sigma = _mixture_params(ens, X)
    y = _as_targets(y, mu.shape[1:])
    q = mixture_quantiles(mu, sigma, [lo, hi])
    return float(np.mean((y >= q[0]) & (y <= q[1])))
