"""Stage two: microcanonical Langevin Monte Carlo around a MAP solution.

The momentum ``u`` is a unit vector. One step is a symmetric
position / momentum / position splitting of the isokinetic dynamics followed
by a partial refresh of ``u``. The energy error of the deterministic part
drives step-size adaptation during warmup; there is no accept/reject step.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as _rng
from .errors import ConfigError, DivergenceError, NumericError
from .network import PriorSpec

DIVERGENCE_THRESHOLD = 1000.0
EMA_SMOOTHING = 0.9
# consecutive divergent sampling steps tolerated before giving up
MAX_CONSECUTIVE_DIVERGENCES = 20
WARMUP_CAP_FACTOR = 0.8
# position weight of the two-stage minimal-norm splitting
MN_LAMBDA = 0.1931833275037836
INTEGRATORS = ("minimal_norm", "leapfrog")
# second-half step-size refinement: gain RM_GAIN / (j + RM_OFFSET) ** RM_DECAY
RM_GAIN = 0.2
RM_OFFSET = 10
RM_DECAY = 0.8
RM_FRACTION = 0.5
L_FRACTION = 0.125
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SamplerConfig:
    warmup_steps: int = 5000
    n_samples: int = 200
    n_thinning: int = 10
    desired_energy_var_start: float = 0.5
    desired_energy_var_end: float = 0.1
    initial_step_size: object = "auto"
    decoherence_length: object = "auto"
    prior: PriorSpec = PriorSpec()
    integrator: str = "minimal_norm"

    def __post_init__(self):
        if self.warmup_steps < 0 or self.n_samples < 0:
            raise ConfigError("warmup_steps and n_samples must be non-negative")
        if self.n_thinning < 1:
            raise ConfigError("n_thinning must be >= 1")
        if not (self.desired_energy_var_start > 0 and self.desired_energy_var_end > 0):
            raise ConfigError("desired energy variances must be positive")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {INTEGRATORS}")
        for name in ("initial_step_size", "decoherence_length"):
            value = getattr(self, name)
            if value != "auto" and not (isinstance(value, (int, float)) and value > 0):
                raise ConfigError(f"{name} must be positive or 'auto'")

    @property
    def n_retained(self):
        return self.n_samples // self.n_thinning


@dataclass
class EnergyStats:
    """Running moments of the per-step energy error (Welford)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    sum_sq: float = 0.0

    def push(self, x):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        self.sum_sq += x * x

    @property
    def var(self):
        return self.m2 / self.count if self.count else math.nan

    def mean_square_per_dim(self, d):
        return self.sum_sq / self.count / d if self.count else math.nan


@dataclass
class SamplerState:
    """Position, unit momentum, step size and decoherence length of one chain.

    ``(seed, phase, counter)`` addresses the random block used by the next
    step; ``potential`` and ``grad`` cache ``U(theta)`` and its gradient
    (the latter only for the minimal-norm integrator).
    """

    theta: np.ndarray
    u: np.ndarray
    eps: float
    L: float
    potential: float
    seed: int = 0
    phase: int = _rng.SAMPLING
    counter: int = 0
    energy: EnergyStats = field(default_factory=EnergyStats)
    integrator: str = "minimal_norm"
    grad: np.ndarray = None


@dataclass
class ChainResult:
    samples: np.ndarray
    state: SamplerState
    divergences: int = 0
    warmup_divergences: int = 0
    energy_ema: float = math.nan


class FunctionPotential:
    """Adapter turning ``logp(theta)`` and ``grad_logp(theta)`` into a sampler target."""

    def __init__(self, logp_fn, grad_fn, dim):
        self._logp = logp_fn
        self._grad = grad_fn
        self.dim = dim

    def __call__(self, theta):
        return -self._logp(theta), -np.asarray(self._grad(theta), dtype=np.float64)

    def value(self, theta):
        return -self._logp(theta)


def isokinetic_momentum_update(u, grad, eps, d):
    """Rotate ``u`` toward ``-grad`` under the isokinetic flow for time ``eps``.

    Returns ``(u_new, kinetic_energy_change)``. Uses ``exp(-delta)`` so large
    gradient norms cannot overflow ``cosh``/``sinh``.
    """
    if d < 2:
        raise ConfigError("isokinetic dynamics needs dimension >= 2")
    g_norm = math.sqrt(float(grad @ grad))
    if g_norm == 0.0:
        return u, 0.0
    e = -grad / g_norm
    a = min(max(float(u @ e), -1.0), 1.0)
    delta = eps * g_norm / (d - 1)
    zeta = math.exp(-delta)
    z2 = zeta * zeta
    # cosh(delta) + a sinh(delta) = exp(delta) / 2 * denom
    denom = (1.0 + a) + (1.0 - a) * z2
    if denom == 0.0:
        # exactly anti-aligned with the force: an (unstable) fixed direction
        return u.copy(), -(d - 1) * delta
    # split u into its component along e and the orthogonal rest
    u_new = (2.0 * zeta * (u - a * e) + e * ((1.0 + a) - (1.0 - a) * z2)) / denom
    if delta <= 1.0:
        # log(cosh + a sinh) without cancellation for small delta
        sh = math.sinh(0.5 * delta)
        dk = (d - 1) * math.log1p(2.0 * sh * sh + a * math.sinh(delta))
    else:
        dk = (d - 1) * (delta - LOG2 + math.log(denom))
    return u_new, dk


def position_update(theta, u, eps, fraction):
    return theta + (fraction * eps) * u


def refresh_strength(eps, L):
    if math.isinf(L):
        return 0.0
    return math.sqrt(math.expm1(2.0 * eps / L))


def partial_refresh(u, eps, L, gen):
    """Mix ``u`` with Gaussian noise of relative strength ``sqrt(exp(2 eps / L) - 1)``; renormalize.

    The noise direction ``z / sqrt(d)`` has unit expected squared norm, so
    ``nu`` is the noise magnitude relative to the unit momentum.
    """
    nu = refresh_strength(eps, L)
    d = u.shape[0]
    z = gen.standard_normal(d)
    w = u + (nu / math.sqrt(d)) * z
    return w / math.sqrt(float(w @ w))


def _leapfrog(state, potential, d):
    eps = state.eps
    theta = position_update(state.theta, state.u, eps, 0.5)
    _, g = potential(theta)
    u, dk = isokinetic_momentum_update(state.u, g, eps, d)
    theta = position_update(theta, u, eps, 0.5)
    return theta, u, potential.value(theta), None, dk


def _minimal_norm(state, potential, d):
    # V(lambda) T(1/2) V(1 - 2 lambda) T(1/2) V(lambda)
    eps = state.eps
    g0 = state.grad
    if g0 is None:
        _, g0 = potential(state.theta)
    u, k1 = isokinetic_momentum_update(state.u, g0, MN_LAMBDA * eps, d)
    theta = position_update(state.theta, u, eps, 0.5)
    _, g = potential(theta)
    u, k2 = isokinetic_momentum_update(u, g, (1.0 - 2.0 * MN_LAMBDA) * eps, d)
    theta = position_update(theta, u, eps, 0.5)
    U, g = potential(theta)
    u, k3 = isokinetic_momentum_update(u, g, MN_LAMBDA * eps, d)
    return theta, u, U, g, k1 + k2 + k3


def mclmc_step(state, potential):
    """Advance one step; returns ``(new_state, energy_error)``.

    ``state.integrator`` selects the splitting: ``"leapfrog"`` is half a
    drift, a full isokinetic kick at the midpoint and another half drift;
    ``"minimal_norm"`` is the kick-drift-kick-drift-kick scheme with lower
    error constant. The refresh is applied after the energy error is
    measured and does not contribute to it. Raises :class:`DivergenceError`
    on a non-finite potential or an energy error above
    ``DIVERGENCE_THRESHOLD``.
    """
    d = state.theta.shape[0]
    eps = state.eps
    step = _leapfrog if state.integrator == "leapfrog" else _minimal_norm
    try:
        theta, u, U, g, dk = step(state, potential, d)
    except NumericError as exc:
        raise DivergenceError(
            f"non-finite potential at step {state.counter}", index=state.counter, eps=eps
        ) from exc
    de = U - state.potential + dk
    if not (math.isfinite(de) and abs(de) <= DIVERGENCE_THRESHOLD):
        raise DivergenceError(
            f"energy error {de:.4g} at step {state.counter} (eps={eps:.4g})",
            index=state.counter, eps=eps,
        )
    u = partial_refresh(u, eps, state.L, _rng.stream(state.seed, state.phase, state.counter))
    return replace(state, theta=theta, u=u, potential=U, grad=g, counter=state.counter + 1), de


def energy_target(k, warmup_steps, start, end):
    """Per-dimension energy-variance target at warmup step ``k``."""
    return start + (end - start) * k / warmup_steps


def adapt_step_size(eps, ema, target):
    """Quarter-power multiplicative correction, clamped to a factor of two."""
    if not ema > 0:
        return 2.0 * eps
    factor = (target / ema) ** 0.25
    return eps * min(max(factor, 0.5), 2.0)


def _decoherence_length(disp, eps, d):
    L = 1.5 * float(np.mean(disp)) if disp else math.sqrt(d) * eps
    return min(max(L, eps), 1e6 * eps)


def _warmup(state, schedule, warmup_steps, potential, auto_L):
    """Adapt ``eps`` (and ``L``) over ``warmup_steps`` steps.

    The first ``1 - RM_FRACTION`` of the steps follow the energy schedule
    with the quarter-power EMA rule. The rest hold the end target and refine
    ``eps`` by Robbins-Monro. With automatic L, the mean displacement from
    the start over the first ``L_FRACTION`` of that second stage fixes L;
    the remaining steps tune ``eps`` under the L it will be sampled with,
    and the final step size is the geometric mean over them.
    """
    start, end = schedule
    d = state.theta.shape[0]
    theta0 = state.theta
    state = replace(state, phase=_rng.WARMUP, counter=0)
    n_adapt = max(warmup_steps - int(warmup_steps * RM_FRACTION), 1)
    n_fix_L = n_adapt + int((warmup_steps - n_adapt) * L_FRACTION)
    ema = None
    eps_cap = math.inf
    rejected = streak = 0
    disp, log_eps = [], []
    L_fixed = math.inf
    for k in range(warmup_steps):
        if auto_L and k < n_fix_L:
            state.L = math.sqrt(d) * state.eps
        elif auto_L:
            if k == n_fix_L:
                L_fixed = _decoherence_length(disp, state.eps, d)
            # same lower clamp as the sampling phase will apply
            state.L = max(L_fixed, state.eps)
        try:
            state, de = mclmc_step(state, potential)
        except DivergenceError:
            rejected += 1
            streak += 1
            if streak > MAX_CONSECUTIVE_DIVERGENCES:
                raise
            eps_cap = WARMUP_CAP_FACTOR * state.eps
            state = replace(state, u=_redraw(state), eps=0.5 * state.eps, counter=state.counter + 1)
            if k >= n_fix_L:
                log_eps.append(math.log(state.eps))
            continue
        streak = 0
        x = de * de / d
        if k < n_adapt:
            ema = x if ema is None else EMA_SMOOTHING * ema + (1.0 - EMA_SMOOTHING) * x
            old = state.eps
            state.eps = min(adapt_step_size(old, ema, energy_target(k, n_adapt, start, end)), eps_cap)
            # energy error scales as eps**2: keep the average describing the new eps
            ema *= (state.eps / old) ** 4
        else:
            state.eps = min(_robbins_monro(state.eps, x, end, k - n_adapt), eps_cap)
            if k < n_fix_L:
                disp.append(math.sqrt(float(np.sum((state.theta - theta0) ** 2))))
            else:
                log_eps.append(math.log(state.eps))
    if log_eps:
        state.eps = math.exp(float(np.mean(log_eps)))
    if auto_L:
        if not log_eps:
            state.L = _decoherence_length(disp, state.eps, d)
        state.L = min(max(state.L, state.eps), 1e6 * state.eps)
    return state, rejected, ema


def _redraw(state):
    """Fresh uniform momentum direction after a rejected step."""
    fresh = _rng.stream(state.seed, state.phase, state.counter | (1 << 63)).standard_normal(state.u.shape[0])
    return fresh / math.sqrt(float(fresh @ fresh))


def _robbins_monro(eps, x, target, j):
    """Decreasing-gain update driving the mean of ``x`` (not its log) to ``target``."""
    step = RM_GAIN / (j + RM_OFFSET) ** RM_DECAY * (1.0 - x / target)
    return eps * math.exp(min(max(step, -LOG2), LOG2))


def tune_step_size(state, schedule, warmup_steps, potential, auto_L=True):
    """Warmup: adapt ``eps`` toward the scheduled energy-variance target.

    Returns ``(state, rejected, final_ema)`` where ``rejected`` counts
    divergent warmup steps. Such a step is discarded: the position is kept,
    the momentum direction redrawn, ``eps`` halved and capped for the rest
    of warmup at ``WARMUP_CAP_FACTOR`` times the value that failed. More than
    ``MAX_CONSECUTIVE_DIVERGENCES`` in a row is fatal.
    """
    if warmup_steps < 1:
        raise ConfigError("warmup_steps must be >= 1")
    return _warmup(state, schedule, warmup_steps, potential, auto_L)


def _auto_step_size(theta, u, U0, potential, seed, target, integrator="minimal_norm"):
    """Largest ``0.25 * sqrt(d) / 2**j`` whose trial step meets ``target``."""
    d = theta.shape[0]
    eps = 0.25 * math.sqrt(d)
    for j in range(60):
        trial = SamplerState(theta, u, eps, math.inf, U0, seed, _rng.STEP_SIZE, j,
                             integrator=integrator)
        try:
            _, de = mclmc_step(trial, potential)
        except DivergenceError:
            de = math.inf
        if de * de / d <= target:
            return eps
        eps *= 0.5
    return eps


def sample_chain(theta_map, cfg, potential, seed):
    """Warm up from ``theta_map`` and collect ``cfg.n_samples // cfg.n_thinning`` draws.

    A divergent sampling step leaves the position unchanged and draws a
    fresh momentum direction; it is counted in ``divergences``. More than
    ``MAX_CONSECUTIVE_DIVERGENCES`` in a row is fatal.
    """
    theta = np.array(theta_map, dtype=np.float64)
    d = theta.shape[0]
    if d < 2:
        raise ConfigError("sampling needs at least two parameters")
    u = _rng.stream(seed, _rng.MOMENTUM).standard_normal(d)
    u /= math.sqrt(float(u @ u))
    try:
        U0 = potential.value(theta)
    except NumericError as exc:
        raise DivergenceError("non-finite potential at the starting point", index=0, seed=seed) from exc

    if cfg.initial_step_size == "auto":
        eps = _auto_step_size(theta, u, U0, potential, seed, cfg.desired_energy_var_start,
                              cfg.integrator)
    else:
        eps = float(cfg.initial_step_size)
    auto_L = cfg.decoherence_length == "auto"
    L = math.sqrt(d) * eps if auto_L else float(cfg.decoherence_length)
    state = SamplerState(theta, u, eps, L, U0, seed, integrator=cfg.integrator)

    rejected, ema = 0, math.nan
    if cfg.warmup_steps > 0:
        schedule = (cfg.desired_energy_var_start, cfg.desired_energy_var_end)
        try:
            state, rejected, ema = tune_step_size(state, schedule, cfg.warmup_steps, potential, auto_L)
        except DivergenceError as exc:
            exc.seed = seed
            raise

    state = replace(state, phase=_rng.SAMPLING, counter=0, energy=EnergyStats())
    retained = np.empty((cfg.n_retained, d))
    divergences = streak = 0
    for k in range(1, cfg.n_samples + 1):
        try:
            state, de = mclmc_step(state, potential)
        except DivergenceError as exc:
            divergences += 1
            streak += 1
            if streak > MAX_CONSECUTIVE_DIVERGENCES:
                exc.seed = seed
                raise
            state = replace(state, u=_redraw(state), counter=state.counter + 1)
        else:
            streak = 0
            state.energy.push(de)
        if k % cfg.n_thinning == 0:
            retained[k // cfg.n_thinning - 1] = state.theta
    return ChainResult(retained, state, divergences, rejected, ema)
