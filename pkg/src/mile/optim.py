"""Stage one: MAP optimization of a single member with AdamW and early stopping."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ConfigError, NumericError, TrainingError
from .network import PriorSpec, init_params, nll_and_grad, per_datum_nll

REL_TOL = 1e-6


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    epochs: int = 1000
    patience: int = 20
    validation_split: float = 0.15
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: object = "full"

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.epochs < 1 or self.patience < 1:
            raise ConfigError("epochs and patience must be positive")
        if self.patience > self.epochs:
            raise ConfigError("patience cannot exceed epochs")
        if not 0.0 <= self.validation_split < 1.0:
            raise ConfigError("validation_split must lie in [0, 1)")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in (0, 1)")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.batch_size != "full" and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ConfigError("batch_size must be a positive integer or 'full'")


@dataclass
class AdamWState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, d):
        return cls(np.zeros(d), np.zeros(d), 0)


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self):
        return len(self.train_loss)


def adamw_step(theta, grad, state, cfg):
    """One AdamW update with weight decay decoupled from the adaptive step.

    Returns the new parameters and a new state; inputs are not modified.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to adamw_step")
    t = state.step_count + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    theta = theta - cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta)
    return theta, AdamWState(m, v, t)


def split_train_validation(data, fraction, seed):
    """Seeded shuffled split; the validation part holds ``ceil(n * fraction)`` rows."""
    if not 0.0 <= fraction < 1.0:
        raise ConfigError("validation fraction must lie in [0, 1)")
    n = data.n
    n_valid = math.ceil(n * fraction)
    if n - n_valid < 1:
        raise ConfigError(f"validation split of {fraction} leaves no training data (n={n})")
    perm = _rng.stream(seed, _rng.SPLIT).permutation(n)
    return data.subset(np.sort(perm[n_valid:])), data.subset(np.sort(perm[:n_valid]))


def _improved(loss, best):
    if not math.isfinite(best):
        return loss < best
    return loss < best - REL_TOL * abs(best)


def train_member(data, net, opt, prior=PriorSpec(), seed=0, theta0=None):
    """MAP-train one member; returns ``(theta_map, history)``.

    The objective is the mean negative log-posterior over the training split,
    ``(NLL + |theta|^2 / (2 prior_std^2)) / n_train``, on top of which AdamW
    applies its decoupled weight decay. Validation loss is the mean NLL of the
    held-out split. The parameters with the best validation loss are returned.
    """
    theta = init_params(net, seed) if theta0 is None else np.array(theta0, dtype=np.float64)
    if opt.validation_split > 0:
        train, valid = split_train_validation(data, opt.validation_split, seed)
    else:
        train, valid = data, None
    n = train.n
    inv_var = 1.0 / prior.prior_std ** 2
    state = AdamWState.zeros(theta.size)
    history = TrainingHistory()
    best_loss, best_theta = math.inf, theta.copy()
    ref_loss, stale = math.inf, 0

    batch = n if opt.batch_size == "full" else min(int(opt.batch_size), n)
    for epoch in range(opt.epochs):
        if batch >= n:
            batches = [None]
        else:
            perm = _rng.stream(seed, _rng.SHUFFLE, epoch).permutation(n)
            batches = [np.sort(perm[i:i + batch]) for i in range(0, n, batch)]
        for idx in batches:
            part = train if idx is None else train.subset(idx)
            try:
                _, g = nll_and_grad(net, theta, part)
            except NumericError as exc:
                raise TrainingError(f"non-finite loss at epoch {epoch}: {exc}", index=epoch) from exc
            g = (g + inv_var * theta * (part.n / n)) / part.n
            theta, state = adamw_step(theta, g, state, opt)

        train_loss = _mean_nll(net, theta, train, epoch)
        valid_loss = train_loss if valid is None else _mean_nll(net, theta, valid, epoch)
        history.train_loss.append(train_loss)
        history.valid_loss.append(valid_loss)

        # checkpoint on any strict decrease; patience only resets on a
        # decrease larger than REL_TOL relative to the last reset point
        if valid_loss < best_loss:
            best_loss, best_theta = valid_loss, theta.copy()
            history.best_epoch = epoch
        if _improved(valid_loss, ref_loss):
            ref_loss, stale = valid_loss, 0
        else:
            stale += 1
            if valid is not None and stale >= opt.patience:
                break
    return best_theta, history


def _mean_nll(net, theta, data, epoch):
    try:
        loss = float(per_datum_nll(net, theta, data).mean())
    except NumericError as exc:
        raise TrainingError(f"non-finite loss at epoch {epoch}: {exc}", index=epoch) from exc
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss at epoch {epoch}", index=epoch)
    return loss
