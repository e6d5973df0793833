"""Bayesian deep ensembles for tabular data.

Each member is MAP-trained with AdamW, then explored with a microcanonical
Langevin (MCLMC) chain started at its mode. The pooled draws form the
posterior predictive.
"""

from .backend import NAME as BACKEND
from .container import load_model, save_model
from .data import StandardizationStats, apply_standardizer, fit_standardizer, load_csv
from .ensemble import EnsembleConfig, PosteriorEnsemble, fit
from .errors import (
    ChecksumError,
    ConfigError,
    ContainerError,
    DataError,
    DivergenceError,
    MileError,
    NumericError,
    ShapeError,
    TaskMismatchError,
    TrainingError,
    TruncatedError,
    VersionError,
)
from .network import Dataset, NetworkConfig, Potential, PriorSpec
from .optim import OptimizerConfig, train_member
from .predictive import (
    metric_coverage,
    metric_nll_distributional,
    metric_nll_mean_regression,
    metric_rmse,
    predict,
    predict_class,
    predict_moments,
    predict_proba,
    predict_quantiles,
    predict_raw,
)
from .rng import derive_member_seed
from .sampler import SamplerConfig, mclmc_step, sample_chain

__version__ = "0.1.0"

from .estimators import BdeClassifier, BdeRegressor  # noqa: E402
