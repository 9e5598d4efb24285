"""
Cluster hierarchical estimator

Step one clusters the observed response proportions with a collapsed
Gibbs sampler over Chinese-restaurant-process assignments and records how
often each pair of cohorts shares a cluster. Step two fits, for every
target cohort, a hierarchical model in which cohort j's prior precision is
scaled by the target's co-clustering frequency with j.
"""

import logging
import math

import numpy as np
from scipy.special import logsumexp

from basketsim.estimators.configs import ChenLeeConfig
from basketsim.kernel import LOG_2PI, Gamma, RngStream, binomial_logit_loglik, logit_normal_binomial
from basketsim.mcmc import (
    ChainModel,
    McmcConfig,
    canonical_cohorts,
    gibbs_gamma_precision,
    gibbs_normal_mean,
    initial_logits,
    mh_logit_block,
    run_chain,
)
from basketsim.models import DataValidationError, EstimateVector, TrialData, validate_trial

logger = logging.getLogger("basketsim")

# co-clustering frequencies at or below this are treated as "no borrowing"
MIN_SHARE = 1e-12


def _normal_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (LOG_2PI + math.log(var)) - (x - mean) ** 2 / (2.0 * var)


######################################################################
#  C O - C L U S T E R I N G
######################################################################
def crp_cocluster_matrix(data: TrialData, cfg: ChenLeeConfig, rng: RngStream) -> np.ndarray:
    """
    Fraction of post-burn-in CRP sweeps in which cohorts i and j share a
    cluster. Observations are the proportions r_i/n_i with noise variance
    sigma_d_sq around a cluster mean drawn from N(base_mean, base_var).
    """
    validate_trial(data)
    if any(cohort.n == 0 for cohort in data.cohorts):
        raise DataValidationError("co-clustering needs n >= 1 in every cohort")
    x = [cohort.proportion for cohort in data.cohorts]
    k = data.k
    noise = cfg.sigma_d_sq
    log_alpha = math.log(cfg.crp_alpha)
    new_table = [log_alpha + _normal_logpdf(value, cfg.base_mean, cfg.base_var + noise) for value in x]
    generator = rng.generator

    labels = list(range(k))
    together = np.zeros((k, k))
    for sweep in range(cfg.crp_burn + cfg.crp_iterations):
        for i in range(k):
            # sufficient statistics of the other cohorts' clusters
            tables = {}
            for j in range(k):
                if j != i:
                    count, total = tables.get(labels[j], (0, 0.0))
                    tables[labels[j]] = (count + 1, total + x[j])
            keys = sorted(tables)
            scores = []
            for key in keys:
                count, total = tables[key]
                post_var = 1.0 / (1.0 / cfg.base_var + count / noise)
                post_mean = post_var * (cfg.base_mean / cfg.base_var + total / noise)
                scores.append(math.log(count) + _normal_logpdf(x[i], post_mean, post_var + noise))
            scores.append(new_table[i])
            probs = np.exp(np.asarray(scores) - logsumexp(scores))
            choice = int(np.searchsorted(np.cumsum(probs), generator.random() * probs.sum(), side="right"))
            choice = min(choice, len(keys))
            labels[i] = keys[choice] if choice < len(keys) else max(labels) + 1
        if sweep >= cfg.crp_burn:
            assignment = np.asarray(labels)
            together += assignment[:, None] == assignment[None, :]
    matrix = together / cfg.crp_iterations
    np.fill_diagonal(matrix, 1.0)
    return matrix


######################################################################
#  P E R - T A R G E T   H I E R A R C H I C A L   F I T
######################################################################
class ChenLeeModel(ChainModel):
    """θ_j ~ N(μ1, 1/(τ1 m_j)) over the cohorts the target borrows from"""

    def __init__(self, data: TrialData, cfg: ChenLeeConfig, shares: np.ndarray, target: int):
        self.cfg = cfg
        self.members = np.flatnonzero(shares > MIN_SHARE)
        self.target_position = int(np.flatnonzero(self.members == target)[0])
        self.weights = shares[self.members]
        self.r = np.asarray(data.r, dtype=float)[self.members]
        self.n = np.asarray(data.n, dtype=float)[self.members]
        self.start = initial_logits(data)[self.members]
        self.size = len(self.members)
        self.tau1_prior = Gamma(cfg.tau1_shape, cfg.tau1_rate)
        self.parameter_names = tuple(f"theta[{j}]" for j in self.members) + ("mu1", "tau1")
        self.record_names = (f"p[{target}]",)

    def initial_state(self) -> np.ndarray:
        mu1 = float(np.average(self.start, weights=self.weights))
        return np.concatenate([self.start, [mu1, self.tau1_prior.mean]])

    def adaptive(self) -> np.ndarray:
        mask = np.zeros(self.size + 2, dtype=bool)
        mask[: self.size] = True
        return mask

    def sweep(self, state, scales, rng):
        size = self.size
        mu1, tau1 = state[size], state[size + 1]
        precision = tau1 * self.weights

        def log_target(theta):
            return binomial_logit_loglik(theta, self.r, self.n) - precision * (theta - mu1) ** 2 / 2.0

        theta, accepted = mh_logit_block(state[:size], log_target, scales[:size], rng)
        state[:size] = theta
        state[size] = gibbs_normal_mean(theta, 1.0 / tau1, self.cfg.mu2, 1.0 / self.cfg.tau2, rng, weights=self.weights)
        state[size + 1] = gibbs_gamma_precision(
            theta - state[size], self.cfg.tau1_shape, self.cfg.tau1_rate, rng, weights=self.weights
        )
        return np.concatenate([accepted, [True, True]])

    def record(self, state):
        t = self.target_position
        mu1, tau1 = state[self.size], state[self.size + 1]
        rate, _ = logit_normal_binomial(self.r[t], self.n[t], mu1, 1.0 / (tau1 * self.weights[t]))
        return np.atleast_1d(rate)


@canonical_cohorts
def estimate_chen_lee_bchm(data: TrialData, cfg: ChenLeeConfig, mcmc: McmcConfig, rng: RngStream) -> EstimateVector:
    """
    Posterior mean of expit(θ_t) from one co-clustering weighted fit per
    target cohort; every fit draws from the same stream
    """
    shares = crp_cocluster_matrix(data, cfg, rng.child(0))
    logger.debug("Co-clustering matrix:\n%s", shares)
    estimates = []
    for target in range(data.k):
        model = ChenLeeModel(data, cfg, shares[target], target)
        summary = run_chain(model, mcmc, rng.child(1))
        estimates.append(float(summary.posterior_mean[0]))
    return EstimateVector(tuple(estimates))
