"""
MCMC engine

Conjugate Gibbs updates, random-walk Metropolis steps on the logit scale
and a chain runner shared by the hierarchical estimators.

A model handed to ``run_chain`` is a ``ChainModel``: it owns a flat state
vector, performs one full sweep of conditional updates in place and says
which state entries use Metropolis proposal scales. The runner adapts
those scales during burn-in only (Robbins-Monro on the log scale toward
``target_accept``) and then freezes them for every retained draw.

Joint moves rescale or shift a block of rates together with its
hierarchical spread or center. Models record conditional posterior
means rather than raw draws.
``canonical_cohorts`` runs an estimator on cohorts sorted by (n, r) and
maps the estimates back, averaging tied cohorts.
"""

import functools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from basketsim.kernel import Gamma, InverseGamma, RngStream
from basketsim.models import DataValidationError, EstimateVector, EstimationError, TrialData, validate_trial

logger = logging.getLogger("basketsim")

# Robbins-Monro step size is (iteration + 1) ** -ADAPT_DECAY
ADAPT_DECAY = 0.6
SCALE_BOUNDS = (1e-8, 1e3)
# largest log-scale jump mh_joint_scale proposes
MAX_LOG_STEP = 50.0


@dataclass(frozen=True)
class McmcConfig:
    """Chain length, thinning and proposal adaptation settings"""

    n_burn: int = 2000
    n_keep: int = 8000
    thin: int = 1
    adapt_window: int = 2000
    target_accept: float = 0.44
    keep_draws: bool = False

    def __post_init__(self):
        if self.n_burn < 0:
            raise DataValidationError(f"n_burn must be >= 0, got {self.n_burn}")
        if self.n_keep < 1:
            raise DataValidationError(f"n_keep must be >= 1, got {self.n_keep}")
        if self.thin < 1:
            raise DataValidationError(f"thin must be >= 1, got {self.thin}")
        if self.thin > self.n_keep:
            raise DataValidationError(f"thin ({self.thin}) exceeds n_keep ({self.n_keep})")
        if self.adapt_window < 0:
            raise DataValidationError(f"adapt_window must be >= 0, got {self.adapt_window}")
        if not 0.0 < self.target_accept < 1.0:
            raise DataValidationError(f"target_accept must lie in (0,1), got {self.target_accept}")

    @property
    def n_retained(self) -> int:
        """Number of draws the summary is computed from"""
        return self.n_keep // self.thin


@dataclass(frozen=True)
class ChainSummary:
    """Posterior summaries of the recorded quantities of one chain"""

    names: tuple[str, ...]
    posterior_mean: np.ndarray
    posterior_sd: np.ndarray
    parameter_names: tuple[str, ...]
    accept_rate: np.ndarray
    n_draws: int
    kept_draws: Optional[np.ndarray] = None

    def mean_of(self, name: str) -> float:
        """Posterior mean of one recorded quantity"""
        return float(self.posterior_mean[self.names.index(name)])


class ChainModel(ABC):
    """A model that run_chain can sample: an initial state plus one sweep"""

    #: names of the entries of the state vector
    parameter_names: tuple[str, ...] = ()
    #: names of the quantities returned by record()
    record_names: tuple[str, ...] = ()

    @abstractmethod
    def initial_state(self) -> np.ndarray:
        """Starting values of the state vector"""

    @abstractmethod
    def sweep(self, state: np.ndarray, scales: np.ndarray, rng: RngStream) -> np.ndarray:
        """Updates state in place; returns per-parameter acceptance flags"""

    def adaptive(self) -> np.ndarray:
        """Mask of the parameters updated by Metropolis steps"""
        return np.zeros(len(self.parameter_names), dtype=bool)

    def initial_scales(self) -> np.ndarray:
        """Starting proposal scales"""
        return np.ones(len(self.parameter_names))

    def record(self, state: np.ndarray) -> np.ndarray:
        """Quantities summarized over retained draws"""
        return state.copy()


######################################################################
#  U P D A T E   S T E P S
######################################################################
def initial_logits(data: TrialData) -> np.ndarray:
    """Data-adjacent start: logit((r + 0.5)/(n + 1)) per cohort"""
    r = np.asarray(data.r, dtype=float)
    n = np.asarray(data.n, dtype=float)
    p = (r + 0.5) / (n + 1.0)
    return np.log(p) - np.log1p(-p)


def mh_logit_step(theta: float, log_target: Callable[[float], float], scale: float, rng: RngStream):
    """
    One symmetric normal random-walk Metropolis step

    Returns the new value and whether the proposal was accepted.
    """
    current = log_target(theta)
    if not math.isfinite(current):
        raise EstimationError(f"log target is not finite at theta={theta}")
    generator = rng.generator
    proposal = theta + scale * generator.standard_normal()
    proposed = log_target(proposal)
    if math.isfinite(proposed) and math.log(generator.random() + 1e-300) < proposed - current:
        return proposal, True
    return theta, False


def mh_logit_block(theta: np.ndarray, log_target: Callable[[np.ndarray], np.ndarray], scales: np.ndarray, rng: RngStream):
    """Componentwise Metropolis steps for conditionally independent entries"""
    current = log_target(theta)
    if not np.all(np.isfinite(current)):
        bad = int(np.flatnonzero(~np.isfinite(current))[0])
        raise EstimationError(f"log target is not finite at component {bad}")
    generator = rng.generator
    proposal = theta + scales * generator.standard_normal(theta.shape)
    proposed = log_target(proposal)
    log_u = np.log(generator.random(theta.shape) + 1e-300)
    with np.errstate(invalid="ignore"):
        accepted = np.isfinite(proposed) & (log_u < proposed - current)
    return np.where(accepted, proposal, theta), accepted


def mh_joint_scale(theta, center, spread, log_lik, log_spread_prior, step, rng: RngStream, power=0.5):
    """
    Metropolis move of a spread parameter that carries the deviations
    theta - center along with it

    log spread moves by step·z and the deviations are multiplied by
    (new/old)**power: 1/2 for a variance, 1 for a standard deviation. The
    normal terms of theta cancel against the Jacobian, leaving the
    likelihood ratio and the spread prior on the log scale.

    Returns the new theta, the new spread and whether the move was accepted.
    """
    generator = rng.generator
    log_ratio = step * generator.standard_normal()
    log_u = math.log(generator.random() + 1e-300)
    if abs(log_ratio) > MAX_LOG_STEP:
        return theta, spread, False
    proposed_spread = spread * math.exp(log_ratio)
    proposal = center + math.exp(power * log_ratio) * (theta - center)
    if not 0.0 < proposed_spread < math.inf:
        return theta, spread, False
    log_alpha = (
        float(np.sum(log_lik(proposal)) - np.sum(log_lik(theta)))
        + float(log_spread_prior(proposed_spread) - log_spread_prior(spread))
        + log_ratio
    )
    if math.isfinite(log_alpha) and log_u < log_alpha:
        return proposal, proposed_spread, True
    return theta, spread, False


def mh_joint_shift(theta, center, log_lik, log_center_prior, step, rng: RngStream):
    """
    Metropolis move that shifts theta and their common center by the same
    amount; the normal terms of theta are unchanged by it

    Returns the new theta, the new center and whether the move was accepted.
    """
    generator = rng.generator
    delta = step * generator.standard_normal()
    log_u = math.log(generator.random() + 1e-300)
    log_alpha = float(np.sum(log_lik(theta + delta)) - np.sum(log_lik(theta))) + float(
        log_center_prior(center + delta) - log_center_prior(center)
    )
    if math.isfinite(log_alpha) and log_u < log_alpha:
        return theta + delta, center + delta, True
    return theta, center, False


def normal_mean_posterior(values, likelihood_var: float, prior_mean: float, prior_var: float, weights=None):
    """Mean and variance of the conjugate posterior of a normal mean"""
    if likelihood_var <= 0 or prior_var <= 0:
        raise DataValidationError("variances must be positive")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DataValidationError("gibbs_normal_mean needs at least one value")
    weights = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float)
    precision = 1.0 / prior_var + float(np.sum(weights)) / likelihood_var
    var = 1.0 / precision
    mean = var * (prior_mean / prior_var + float(np.sum(weights * values)) / likelihood_var)
    return mean, var


def gibbs_normal_mean(values, likelihood_var: float, prior_mean: float, prior_var: float, rng: RngStream, weights=None) -> float:
    """
    Draws a normal mean from its exact conjugate posterior

    Optional weights multiply the precision of each value (value j has
    variance likelihood_var / weights[j]).
    """
    mean, var = normal_mean_posterior(values, likelihood_var, prior_mean, prior_var, weights)
    return float(rng.generator.normal(mean, math.sqrt(var)))


def gibbs_inverse_gamma_var(residuals, prior_shape: float, prior_scale: float, rng: RngStream) -> float:
    """Draws a variance from IG(shape + m/2, scale + sum(residuals²)/2)"""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        raise DataValidationError("gibbs_inverse_gamma_var needs at least one residual")
    posterior = InverseGamma(
        prior_shape + residuals.size / 2.0,
        prior_scale + float(np.sum(residuals**2)) / 2.0,
    )
    return posterior.sample(rng.generator)


def gibbs_gamma_precision(residuals, prior_shape: float, prior_rate: float, rng: RngStream, weights=None) -> float:
    """Draws a precision from Gamma(shape + m/2, rate + sum(w·residuals²)/2)"""
    residuals = np.asarray(residuals, dtype=float)
    weights = np.ones_like(residuals) if weights is None else np.asarray(weights, dtype=float)
    posterior = Gamma(
        prior_shape + residuals.size / 2.0,
        prior_rate + float(np.sum(weights * residuals**2)) / 2.0,
    )
    return posterior.sample(rng.generator)


######################################################################
#  C H A I N   R U N N E R
######################################################################
def _check_finite(state: np.ndarray, iteration: int, model: ChainModel):
    if not np.all(np.isfinite(state)):
        index = int(np.flatnonzero(~np.isfinite(state))[0])
        name = model.parameter_names[index] if index < len(model.parameter_names) else str(index)
        raise EstimationError(f"non-finite state at iteration {iteration}: {name}={state[index]}")


def run_chain(model: ChainModel, config: McmcConfig, rng: RngStream) -> ChainSummary:
    """Runs n_burn + n_keep sweeps and summarizes every thin-th retained state"""
    state = np.array(model.initial_state(), dtype=float)
    _check_finite(state, 0, model)
    scales = np.array(model.initial_scales(), dtype=float)
    adaptive = model.adaptive()
    adapt_until = min(config.adapt_window, config.n_burn)

    draws = np.empty((config.n_retained, len(model.record_names)))
    accepted_total = np.zeros(len(state))
    kept = 0
    for iteration in range(config.n_burn + config.n_keep):
        accepted = model.sweep(state, scales, rng)
        _check_finite(state, iteration + 1, model)
        if iteration < config.n_burn:
            if iteration < adapt_until and adaptive.any():
                step = (iteration + 1.0) ** -ADAPT_DECAY
                scales[adaptive] *= np.exp(step * (accepted[adaptive] - config.target_accept))
                np.clip(scales, SCALE_BOUNDS[0], SCALE_BOUNDS[1], out=scales)
            continue
        accepted_total += accepted
        if (iteration - config.n_burn + 1) % config.thin == 0 and kept < config.n_retained:
            draws[kept] = model.record(state)
            kept += 1

    sd = draws.std(axis=0, ddof=1) if kept > 1 else np.zeros(draws.shape[1])
    return ChainSummary(
        names=tuple(model.record_names),
        posterior_mean=draws.mean(axis=0),
        posterior_sd=sd,
        parameter_names=tuple(model.parameter_names),
        accept_rate=accepted_total / config.n_keep,
        n_draws=kept,
        kept_draws=draws if config.keep_draws else None,
    )


######################################################################
#  C O H O R T   O R D E R
######################################################################
def canonical_cohorts(estimator):
    """
    Runs a sampled estimator on the cohorts sorted by (n, r) and returns
    the estimates in the caller's order

    Cohorts with identical counts have equal posterior means, so their
    Monte-Carlo estimates are replaced by their average. Together with the
    sorting this makes the result equivariant under any reordering of
    the cohorts.
    """

    @functools.wraps(estimator)
    def run(data: TrialData, cfg, mcmc: McmcConfig, rng: RngStream) -> EstimateVector:
        validate_trial(data)
        keys = [(cohort.n, cohort.r) for cohort in data.cohorts]
        order = sorted(range(data.k), key=keys.__getitem__)
        estimates = np.empty(data.k)
        estimates[order] = estimator(data.permuted(order), cfg, mcmc, rng).estimates
        for key in set(keys):
            tied = [i for i, other in enumerate(keys) if other == key]
            if len(tied) > 1:
                estimates[tied] = np.sort(estimates[tied]).mean()
        return EstimateVector(tuple(float(value) for value in estimates))

    return run
