"""Estimator wrappers with a ``fit`` / ``predict`` interface."""

import numpy as np

from . import predictive
from .config import build_config
from .ensemble import fit as fit_ensemble
from .errors import ConfigError, ShapeError
from .network import Dataset


class _Base:
    _task = None

    def __init__(
        self,
        n_members=8,
        hidden_layers=(16, 16),
        activation="relu",
        epochs=1000,
        validation_split=0.15,
        lr=1e-3,
        weight_decay=1e-4,
        patience=20,
        warmup_steps=5000,
        n_samples=200,
        n_thinning=10,
        desired_energy_var_start=0.5,
        desired_energy_var_end=0.1,
        prior_std=1.0,
        master_seed=0,
        max_workers="auto",
    ):
        self.n_members = n_members
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.epochs = epochs
        self.validation_split = validation_split
        self.lr = lr
        self.weight_decay = weight_decay
        self.patience = patience
        self.warmup_steps = warmup_steps
        self.n_samples = n_samples
        self.n_thinning = n_thinning
        self.desired_energy_var_start = desired_energy_var_start
        self.desired_energy_var_end = desired_energy_var_end
        self.prior_std = prior_std
        self.master_seed = master_seed
        self.max_workers = max_workers
        self.ensemble_ = None

    def get_params(self):
        names = self.__init__.__code__.co_varnames[1 : self.__init__.__code__.co_argcount]
        return {k: getattr(self, k) for k in names}

    def _config(self, input_dim, n_outputs):
        params = self.get_params()
        params["hidden_layers"] = list(params["hidden_layers"])
        return build_config(params, input_dim, self._task, n_outputs)

    def _check_fitted(self):
        if self.ensemble_ is None:
            raise ConfigError(f"{type(self).__name__} is not fitted yet")

    @staticmethod
    def _as_X(x):
        X = np.asarray(x, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ShapeError("x must be 1-D or 2-D")
        return X


class BdeRegressor(_Base):
    """Distributional regression; predictions are in the units of ``y``."""

    _task = "regression"

    def fit(self, x, y):
        X = self._as_X(x)
        y = np.asarray(y, dtype=np.float64)
        self._squeeze = y.ndim == 1
        data = Dataset(X, y, "regression")
        self.ensemble_ = fit_ensemble(data, self._config(X.shape[1], data.y.shape[1]))
        return self

    def predict(self, x, mean_and_std=False, credible_intervals=None, raw=False):
        """Predictive mean by default.

        Returns
        -------
        means, or ``(means, stds)`` with ``mean_and_std``, or
        ``(means, intervals)`` with ``credible_intervals`` (one row per level),
        or the ``S x n x 2t`` per-sample array with ``raw``.
        """
        self._check_fitted()
        X = self._as_X(x)
        if raw:
            return predictive.predict_raw(self.ensemble_, X)
        res = predictive.predict(self.ensemble_, X, mean_and_std, credible_intervals)
        sq = (lambda a: a[..., 0]) if self._squeeze else (lambda a: a)
        if credible_intervals is not None:
            return sq(res.means), np.stack([sq(res.quantiles[float(lv)]) for lv in credible_intervals])
        if mean_and_std:
            return sq(res.means), sq(res.stds)
        return sq(res.means)


class BdeClassifier(_Base):
    """Softmax classification over arbitrary label values."""

    _task = "classification"

    def fit(self, x, y):
        X = self._as_X(x)
        self.classes_, codes = np.unique(np.asarray(y), return_inverse=True)
        if self.classes_.size < 2:
            raise ShapeError("need at least two classes")
        data = Dataset(X, codes.astype(np.int64), "classification", list(self.classes_))
        self.ensemble_ = fit_ensemble(data, self._config(X.shape[1], self.classes_.size))
        return self

    def predict_proba(self, x):
        self._check_fitted()
        return predictive.predict_proba(self.ensemble_, self._as_X(x))

    def predict(self, x, raw=False):
        """Most probable label, or the ``S x n x k`` per-sample probabilities with ``raw``."""
        self._check_fitted()
        X = self._as_X(x)
        if raw:
            return predictive.predict_raw(self.ensemble_, X)
        return self.classes_[predictive.predict_class(self.ensemble_, X)]
