"""Ensemble orchestration: independent train -> tune -> sample pipelines per member."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import StandardizationStats, apply_standardizer, fit_standardizer
from .errors import ConfigError, MileError
from .network import NetworkConfig, Potential, init_params
from .optim import OptimizerConfig, train_member
from .rng import SEED_SCHEME, derive_member_seed
from .sampler import SamplerConfig, sample_chain

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleConfig:
    net: NetworkConfig
    opt: OptimizerConfig = OptimizerConfig()
    sampler: SamplerConfig = SamplerConfig()
    n_members: int = 8
    master_seed: int = 0
    max_workers: object = "auto"

    def __post_init__(self):
        if self.n_members < 1:
            raise ConfigError("n_members must be >= 1")
        if self.max_workers != "auto" and (not isinstance(self.max_workers, int) or self.max_workers < 1):
            raise ConfigError("max_workers must be a positive integer or 'auto'")

    @property
    def n_posterior_samples(self):
        return self.n_members * self.sampler.n_retained


@dataclass(frozen=True)
class MemberMeta:
    seed: int
    step_size: float
    decoherence_length: float
    map_valid_loss: float
    divergences: int
    epochs: int = 0
    warmup_divergences: int = 0

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class PosteriorEnsemble:
    """Retained posterior draws (rows) plus everything needed to predict."""

    samples: np.ndarray
    net: NetworkConfig
    standardization: StandardizationStats
    member_meta: tuple = ()
    config: EnsembleConfig = None
    labels: tuple = None
    seed_scheme: str = SEED_SCHEME
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] != self.net.n_params:
            raise ConfigError(
                f"samples must be (S >= 1, {self.net.n_params}); got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ConfigError("posterior samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def task(self):
        return self.net.task


def resolve_workers(max_workers, n_members):
    """Worker count: ``BDE_MAX_WORKERS`` overrides; ``"auto"`` is min(members, cores)."""
    env = os.environ.get("BDE_MAX_WORKERS")
    if env:
        try:
            max_workers = int(env)
        except ValueError:
            raise ConfigError(f"BDE_MAX_WORKERS must be an integer, got {env!r}") from None
        if max_workers < 1:
            raise ConfigError("BDE_MAX_WORKERS must be positive")
    if max_workers == "auto":
        max_workers = os.cpu_count() or 1
    return max(1, min(int(max_workers), n_members))


def run_member(data, cfg, member_index):
    """One member's full pipeline on already standardized data.

    Returns ``(samples, meta)``.
    """
    seed = derive_member_seed(cfg.master_seed, member_index)
    prior = cfg.sampler.prior
    theta0 = init_params(cfg.net, seed)
    theta_map, history = train_member(data, cfg.net, cfg.opt, prior, seed, theta0=theta0)
    chain = sample_chain(theta_map, cfg.sampler, Potential(cfg.net, data, prior), seed)
    meta = MemberMeta(
        seed=seed,
        step_size=chain.state.eps,
        decoherence_length=chain.state.L,
        map_valid_loss=min(history.valid_loss),
        divergences=chain.divergences,
        epochs=len(history),
        warmup_divergences=chain.warmup_divergences,
    )
    return chain.samples, meta


class MemberError(MileError):
    """A member pipeline failed; ``member`` is its index, ``__cause__`` the original error."""

    def __init__(self, message, member):
        super().__init__(message)
        self.member = member


def fit(data, cfg, members=None):
    """Fit the ensemble; ``members`` restricts to a subset of member indices.

    The result depends only on ``(data, cfg)``: each member derives its own
    seed and random streams, and rows are concatenated in member order.
    """
    stats = fit_standardizer(data)
    std = apply_standardizer(stats, data)
    if std.X.shape[1] != cfg.net.input_dim:
        raise ConfigError(f"data has {std.X.shape[1]} features, network expects {cfg.net.input_dim}")
    indices = list(range(cfg.n_members)) if members is None else list(members)
    workers = resolve_workers(cfg.max_workers, len(indices))
    log.info("fitting %d members on %d worker(s)", len(indices), workers)

    def job(i):
        try:
            return run_member(std, cfg, i)
        except MileError as exc:
            if hasattr(exc, "member"):
                exc.member = i
            raise MemberError(f"member {i} failed: {exc}", i) from exc

    if workers == 1:
        results = [job(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job, i) for i in indices]
            try:
                results = [f.result() for f in futures]
            except BaseException:
                for f in futures:
                    f.cancel()
                raise
    samples = np.concatenate([r[0] for r in results], axis=0)
    return PosteriorEnsemble(
        samples=samples,
        net=cfg.net,
        standardization=stats,
        member_meta=tuple(r[1] for r in results),
        config=cfg,
        labels=tuple(data.labels) if data.labels is not None else None,
    )
