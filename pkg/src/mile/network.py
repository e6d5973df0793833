"""Feed-forward network, task heads and the log-posterior target.

Parameters live in one flat float64 vector, packed layer by layer as the
weight matrix (fan_in x fan_out, row-major) followed by the bias. The heavy
lifting is delegated to the kernel backend chosen in :mod:`mile.backend`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .backend import kernels
from .errors import ConfigError, NumericError, ShapeError

SIGMA_MIN = 1e-3
ACTIVATIONS = ("relu", "tanh")
TASKS = ("regression", "classification")


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture plus task head.

    ``n_outputs`` is the number of regression targets ``t`` or the number of
    classes ``k``.
    """

    input_dim: int
    hidden_layers: tuple = (16, 16)
    activation: str = "relu"
    task: str = "regression"
    n_outputs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.input_dim < 1:
            raise ConfigError("input_dim must be positive")
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigError("hidden layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.n_outputs < 1 or (self.task == "classification" and self.n_outputs < 2):
            raise ConfigError("need >= 1 target or >= 2 classes")

    @property
    def output_width(self):
        return 2 * self.n_outputs if self.task == "regression" else self.n_outputs

    @property
    def layer_sizes(self):
        return (self.input_dim, *self.hidden_layers, self.output_width)

    @property
    def n_params(self):
        s = self.layer_sizes
        return sum((a + 1) * b for a, b in zip(s[:-1], s[1:]))

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden_layers": list(self.hidden_layers),
            "activation": self.activation,
            "task": self.task,
            "n_outputs": self.n_outputs,
        }


@dataclass(frozen=True)
class PriorSpec:
    """Isotropic Gaussian prior over all parameters."""

    prior_std: float = 1.0

    def __post_init__(self):
        if not self.prior_std > 0:
            raise ConfigError("prior_std must be positive")


@dataclass
class Dataset:
    """Design matrix with regression targets (n x t) or integer labels (n,)."""

    X: np.ndarray
    y: np.ndarray
    task: str = "regression"
    labels: list = field(default=None)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ShapeError("X must be a 2-D array")
        if self.task == "regression":
            y = np.asarray(self.y, dtype=np.float64)
            self.y = np.ascontiguousarray(y.reshape(-1, 1) if y.ndim == 1 else y)
        else:
            y = np.asarray(self.y)
            if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
                raise ShapeError("classification labels must be a 1-D integer array")
            if y.size and y.min() < 0:
                raise ShapeError("labels must be non-negative")
            self.y = np.ascontiguousarray(y, dtype=np.int64)
        if self.y.shape[0] != self.X.shape[0]:
            raise ShapeError("X and y disagree on the number of rows")
        if not np.all(np.isfinite(self.X)):
            raise NumericError("non-finite feature value")
        if self.task == "regression" and not np.all(np.isfinite(self.y)):
            raise NumericError("non-finite target value")

    @property
    def n(self):
        return self.X.shape[0]

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], self.task, self.labels)


def _act_code(config):
    return ACTIVATIONS.index(config.activation)


def _check(config, theta, X):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.shape != (config.n_params,):
        raise ShapeError(f"theta has shape {theta.shape}, expected ({config.n_params},)")
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise ShapeError(f"X has shape {X.shape}, expected (n, {config.input_dim})")
    return theta, X


def unpack(config, theta):
    """List of ``(W, b)`` views into ``theta``."""
    out, pos = [], 0
    s = config.layer_sizes
    for fin, fout in zip(s[:-1], s[1:]):
        W = theta[pos:pos + fin * fout].reshape(fin, fout)
        pos += fin * fout
        out.append((W, theta[pos:pos + fout]))
        pos += fout
    return out


def init_params(config, seed):
    """Random initial parameters: He (relu) or Glorot (tanh) normal weights, zero biases."""
    gen = _rng.stream(seed, _rng.INIT)
    theta = np.zeros(config.n_params)
    for W, _ in unpack(config, theta):
        fin, fout = W.shape
        if config.activation == "relu":
            std = np.sqrt(2.0 / fin)
        else:
            std = np.sqrt(2.0 / (fin + fout))
        W[...] = gen.normal(0.0, std, size=W.shape)
    return theta


def forward(config, theta, X):
    """Raw network output, shape (n, output_width)."""
    theta, X = _check(config, theta, X)
    return kernels.forward(theta, X, np.asarray(config.layer_sizes), _act_code(config))


def softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def decode_gaussian_head(raw, sigma_min=SIGMA_MIN):
    """Split raw regression output into ``(mu, sigma)``; sigma = softplus + floor."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] % 2:
        raise ShapeError("regression head needs an even number of outputs")
    t = raw.shape[-1] // 2
    return raw[..., :t], softplus(raw[..., t:]) + sigma_min


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _targets(config, data):
    if data.task != config.task:
        raise ShapeError(f"dataset task {data.task!r} does not match network task {config.task!r}")
    if config.task == "regression":
        if data.y.shape[1] != config.n_outputs:
            raise ShapeError(f"expected {config.n_outputs} target columns, got {data.y.shape[1]}")
        return data.y, np.zeros(0, dtype=np.int64), 0
    if data.y.size and data.y.max() >= config.n_outputs:
        raise ShapeError(f"label {data.y.max()} out of range for {config.n_outputs} classes")
    return np.zeros((0, 0)), data.y, 1


def _rows(config, theta, data, want_grad):
    theta, X = _check(config, theta, data.X)
    y_reg, y_lab, task = _targets(config, data)
    rows, grad = kernels.loss_grad(
        theta, X, y_reg, y_lab, np.asarray(config.layer_sizes),
        _act_code(config), task, SIGMA_MIN, want_grad,
    )
    bad = ~np.isfinite(rows)
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericError(f"non-finite likelihood at datum {i}", index=i)
    if want_grad and not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    return rows, grad


def per_datum_nll(config, theta, data):
    """Vector of per-datum negative log-likelihoods."""
    return _rows(config, theta, data, False)[0]


def negative_log_likelihood(config, theta, data):
    """Summed negative log-likelihood of ``data``."""
    return float(per_datum_nll(config, theta, data).sum())


def nll_and_grad(config, theta, data):
    """Summed NLL and its gradient with respect to ``theta``."""
    rows, grad = _rows(config, theta, data, True)
    return float(rows.sum()), grad


def log_posterior(config, theta, data, prior=PriorSpec()):
    theta = np.asarray(theta, dtype=np.float64)
    nll = negative_log_likelihood(config, theta, data)
    return -nll - float(theta @ theta) / (2.0 * prior.prior_std ** 2)


def grad_log_posterior(config, theta, data, prior=PriorSpec()):
    theta = np.asarray(theta, dtype=np.float64)
    _, g = nll_and_grad(config, theta, data)
    return -g - theta / prior.prior_std ** 2


class Potential:
    """Negative log-posterior ``U = -log p(theta | data)`` as a sampler target.

    Calling the object returns ``(U, grad U)``; :meth:`value` skips the
    backward pass.
    """

    def __init__(self, config, data, prior=PriorSpec()):
        self.config = config
        self.data = data
        self.prior = prior
        self.dim = config.n_params
        self._inv_var = 1.0 / prior.prior_std ** 2

    def __call__(self, theta):
        nll, g = nll_and_grad(self.config, theta, self.data)
        return nll + 0.5 * self._inv_var * float(theta @ theta), g + self._inv_var * theta

    def value(self, theta):
        nll = negative_log_likelihood(self.config, theta, self.data)
        return nll + 0.5 * self._inv_var * float(theta @ theta)
