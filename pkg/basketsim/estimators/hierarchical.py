"""
Hierarchical estimators

Berry's exchangeable BHM, the EX/NEX mixture and Jin's correlated BHM.
Every model works on the log-odds θ_i and reports the posterior mean of
the RATE, expit(θ_i). Retained draws record the conditional mean of the
rate given the rest of the state, computed by quadrature, rather than
expit of the sampled θ_i.
"""

import logging
import math

import numpy as np
from scipy import linalg

from basketsim.estimators.configs import BerryConfig, ExnexConfig, JinConfig
from basketsim.kernel import (
    LOG_2PI,
    BetaParams,
    Gamma,
    HalfNormal,
    InverseGamma,
    Normal,
    RngStream,
    binomial_logit_loglik,
    hellinger_beta,
    logit_normal_binomial,
)
from basketsim.mcmc import (
    ChainModel,
    McmcConfig,
    canonical_cohorts,
    gibbs_inverse_gamma_var,
    gibbs_normal_mean,
    initial_logits,
    mh_joint_scale,
    mh_joint_shift,
    mh_logit_block,
    mh_logit_step,
    run_chain,
)
from basketsim.models import EstimateVector, TrialData

logger = logging.getLogger("basketsim")

# diagonal jitter added to a singular correlation matrix
OMEGA_JITTER = 1e-8


def _prior_mean_or_one(prior: InverseGamma) -> float:
    return prior.mean if prior.mean is not None else 1.0


######################################################################
#  B E R R Y   B H M
######################################################################
class BerryModel(ChainModel):
    """
    θ_i ~ N(μ, σ²) with conjugate updates for μ and σ², followed by a
    joint rescaling of (θ, σ²) and a joint shift of (θ, μ) so the chain
    can leave the small-σ² funnel. Retained draws record E[expit θ_i | μ, σ²]
    """

    def __init__(self, data: TrialData, cfg: BerryConfig):
        self.data = data
        self.k = data.k
        self.r = np.asarray(data.r, dtype=float)
        self.n = np.asarray(data.n, dtype=float)
        self.cfg = cfg
        self.variance_prior = InverseGamma(cfg.lambda1, cfg.lambda2)
        self.mu_prior = Normal(cfg.mu0, cfg.sigma0_sq)
        self.parameter_names = tuple(f"theta[{i}]" for i in range(self.k)) + ("mu", "sigma_sq")
        self.record_names = tuple(f"p[{i}]" for i in range(self.k))

    def initial_state(self) -> np.ndarray:
        theta = initial_logits(self.data)
        return np.concatenate([theta, [theta.mean(), _prior_mean_or_one(self.variance_prior)]])

    def initial_scales(self) -> np.ndarray:
        scales = np.ones(self.k + 2)
        scales[self.k] = 0.5
        return scales

    def adaptive(self) -> np.ndarray:
        return np.ones(self.k + 2, dtype=bool)

    def log_lik(self, theta):
        """Per-cohort binomial log-likelihood"""
        return binomial_logit_loglik(theta, self.r, self.n)

    def sweep(self, state, scales, rng):
        k = self.k
        mu, sigma_sq = state[k], state[k + 1]

        def log_target(theta):
            return self.log_lik(theta) - (theta - mu) ** 2 / (2.0 * sigma_sq)

        theta, accepted = mh_logit_block(state[:k], log_target, scales[:k], rng)
        mu = gibbs_normal_mean(theta, sigma_sq, self.cfg.mu0, self.cfg.sigma0_sq, rng)
        sigma_sq = gibbs_inverse_gamma_var(theta - mu, self.cfg.lambda1, self.cfg.lambda2, rng)
        theta, sigma_sq, scaled = mh_joint_scale(
            theta, mu, sigma_sq, self.log_lik, self.variance_prior.logpdf, scales[k + 1], rng, power=0.5
        )
        theta, mu, shifted = mh_joint_shift(theta, mu, self.log_lik, self.mu_prior.logpdf, scales[k], rng)
        state[:k] = theta
        state[k], state[k + 1] = mu, sigma_sq
        return np.concatenate([accepted, [shifted, scaled]])

    def record(self, state):
        rate, _ = logit_normal_binomial(self.r, self.n, state[self.k], state[self.k + 1])
        return rate


@canonical_cohorts
def estimate_berry_bhm(data: TrialData, cfg: BerryConfig, mcmc: McmcConfig, rng: RngStream) -> EstimateVector:
    """Posterior means of expit(θ_i) under the exchangeable hierarchical model"""
    summary = run_chain(BerryModel(data, cfg), mcmc, rng.child(0))
    return EstimateVector(tuple(summary.posterior_mean))


######################################################################
#  E X N E X
######################################################################
class ExnexModel(ChainModel):
    """
    Two-component mixture per cohort: EX θ_i ~ N(μ, σ²) with prior weight
    w, NEX θ_i ~ N(m, v) otherwise. The component indicator is redrawn from
    its exact Bernoulli conditional every sweep; μ is conjugate given the
    EX members, then shifted jointly with them, and σ moves by Metropolis
    on log σ together with the members' deviations from μ.

    Retained draws record E[expit θ_i | μ, σ] with the indicator summed out.
    """

    def __init__(self, data: TrialData, cfg: ExnexConfig):
        self.data = data
        self.k = data.k
        self.r = np.asarray(data.r, dtype=float)
        self.n = np.asarray(data.n, dtype=float)
        self.cfg = cfg
        self.sigma_prior = HalfNormal(cfg.sigma0_halfnormal_scale)
        self.mu_prior = Normal(cfg.mu0_mean, cfg.mu0_var)
        self.nex = Normal(cfg.nex_mean, cfg.nex_var)
        self.nex_rate, self.nex_evidence = logit_normal_binomial(self.r, self.n, self.nex.mean, self.nex.var)
        self.parameter_names = (
            tuple(f"theta[{i}]" for i in range(self.k)) + ("mu", "sigma") + tuple(f"ex[{i}]" for i in range(self.k))
        )
        self.record_names = tuple(f"p[{i}]" for i in range(self.k))

    @property
    def _mu(self):
        return self.k

    @property
    def _sigma(self):
        return self.k + 1

    def initial_state(self) -> np.ndarray:
        theta = initial_logits(self.data)
        sigma = self.cfg.sigma0_halfnormal_scale * math.sqrt(2.0 / math.pi)
        indicators = np.ones(self.k) if self.cfg.ex_weight > 0.0 else np.zeros(self.k)
        return np.concatenate([theta, [theta.mean(), sigma], indicators])

    def initial_scales(self) -> np.ndarray:
        scales = np.ones(2 * self.k + 2)
        scales[self._mu] = 0.5
        return scales

    def adaptive(self) -> np.ndarray:
        mask = np.zeros(2 * self.k + 2, dtype=bool)
        mask[: self.k + 2] = True
        return mask

    def _draw_indicators(self, theta, mu, sigma, rng):
        w = self.cfg.ex_weight
        if w >= 1.0:
            return np.ones(self.k)
        if w <= 0.0:
            return np.zeros(self.k)
        log_ex = math.log(w) + Normal(mu, sigma**2).logpdf(theta)
        log_nex = math.log1p(-w) + self.nex.logpdf(theta)
        prob_ex = np.exp(log_ex - np.logaddexp(log_ex, log_nex))
        return (rng.generator.random(self.k) < prob_ex).astype(float)

    def sweep(self, state, scales, rng):
        k = self.k
        mu, sigma = state[self._mu], state[self._sigma]
        state[k + 2 :] = self._draw_indicators(state[:k], mu, sigma, rng)
        ex = state[k + 2 :] > 0.5

        prior_mean = np.where(ex, mu, self.nex.mean)
        prior_var = np.where(ex, sigma**2, self.nex.var)

        def log_target(theta):
            return binomial_logit_loglik(theta, self.r, self.n) - (theta - prior_mean) ** 2 / (2.0 * prior_var)

        theta, accepted = mh_logit_block(state[:k], log_target, scales[:k], rng)

        def log_lik(members):
            return binomial_logit_loglik(members, self.r[ex], self.n[ex])

        members = theta[ex]
        if members.size:
            mu = gibbs_normal_mean(members, sigma**2, self.mu_prior.mean, self.mu_prior.var, rng)
        else:
            mu = self.mu_prior.sample(rng.generator)
        members, sigma, scaled = mh_joint_scale(
            members, mu, sigma, log_lik, self.sigma_prior.logpdf, scales[self._sigma], rng, power=1.0
        )
        members, mu, shifted = mh_joint_shift(members, mu, log_lik, self.mu_prior.logpdf, scales[self._mu], rng)
        theta[ex] = members
        state[:k] = theta
        state[self._mu], state[self._sigma] = mu, sigma

        flags = np.ones(2 * k + 2, dtype=bool)
        flags[:k] = accepted
        flags[self._mu] = shifted
        flags[self._sigma] = scaled
        return flags

    def record(self, state):
        w = self.cfg.ex_weight
        if w <= 0.0:
            return self.nex_rate.copy()
        ex_rate, ex_evidence = logit_normal_binomial(self.r, self.n, state[self._mu], state[self._sigma] ** 2)
        if w >= 1.0:
            return ex_rate
        log_ex = math.log(w) + ex_evidence
        log_nex = math.log1p(-w) + self.nex_evidence
        prob_ex = np.exp(log_ex - np.logaddexp(log_ex, log_nex))
        return prob_ex * ex_rate + (1.0 - prob_ex) * self.nex_rate


@canonical_cohorts
def estimate_exnex(data: TrialData, cfg: ExnexConfig, mcmc: McmcConfig, rng: RngStream) -> EstimateVector:
    """Posterior means of expit(θ_i) under the EX/NEX mixture"""
    summary = run_chain(ExnexModel(data, cfg), mcmc, rng.child(0))
    return EstimateVector(tuple(summary.posterior_mean))


######################################################################
#  J I N   C B H M
######################################################################
def hellinger_matrix(data: TrialData) -> np.ndarray:
    """Pairwise Hellinger distances between standalone Beta(1+r, 1+n-r) posteriors"""
    posteriors = [BetaParams(1.0 + c.r, 1.0 + c.n - c.r) for c in data.cohorts]
    distances = np.zeros((data.k, data.k))
    for i in range(data.k):
        for j in range(i + 1, data.k):
            distances[i, j] = distances[j, i] = hellinger_beta(posteriors[i], posteriors[j])
    return distances


class JinModel(ChainModel):
    """
    θ ~ MVN(θ0·1, σ²Ω(φ) + τ²I) with η and ε integrated out. θ_i moves by
    Metropolis against its Gaussian full conditional, θ0 and σ0² are
    conjugate, and σ², τ², φ move by Metropolis on the log scale.
    """

    def __init__(self, data: TrialData, cfg: JinConfig):
        self.data = data
        self.k = data.k
        self.r = np.asarray(data.r, dtype=float)
        self.n = np.asarray(data.n, dtype=float)
        self.cfg = cfg
        self.squared_distance = hellinger_matrix(data) ** 2
        self.sigma0_sq_prior = InverseGamma(cfg.sigma0_sq_shape, cfg.sigma0_sq_scale)
        self.sigma_sq_prior = InverseGamma(cfg.sigma_sq_shape, cfg.sigma_sq_scale)
        self.tau_sq_prior = InverseGamma(cfg.tau_sq_shape, cfg.tau_sq_scale)
        self.phi_prior = Gamma(cfg.phi_shape, cfg.phi_rate)
        self.jitter = 0.0
        try:
            np.linalg.cholesky(self.correlation(self.phi_prior.mean))
        except np.linalg.LinAlgError:
            logger.warning("Correlation matrix is not positive definite; adding %g to its diagonal", OMEGA_JITTER)
            self.jitter = OMEGA_JITTER
        self.parameter_names = tuple(f"theta[{i}]" for i in range(self.k)) + (
            "theta0",
            "sigma0_sq",
            "sigma_sq",
            "tau_sq",
            "phi",
        )
        self.record_names = tuple(f"p[{i}]" for i in range(self.k))

    def correlation(self, phi: float) -> np.ndarray:
        """Ω_ij = exp(-φ d_ij²)"""
        return np.exp(-phi * self.squared_distance)

    def covariance(self, sigma_sq: float, tau_sq: float, phi: float) -> np.ndarray:
        """σ²Ω + τ²I"""
        omega = self.correlation(phi) + self.jitter * np.eye(self.k)
        return sigma_sq * omega + tau_sq * np.eye(self.k)

    def mvn_logpdf(self, theta: np.ndarray, theta0: float, cov: np.ndarray) -> float:
        """Log density of θ under MVN(θ0·1, cov)"""
        try:
            lower = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            return -math.inf
        z = linalg.solve_triangular(lower, theta - theta0, lower=True)
        return float(-np.sum(np.log(np.diag(lower))) - 0.5 * z @ z - 0.5 * self.k * LOG_2PI)

    def initial_state(self) -> np.ndarray:
        theta = initial_logits(self.data)
        return np.concatenate(
            [
                theta,
                [
                    theta.mean(),
                    _prior_mean_or_one(self.sigma0_sq_prior),
                    _prior_mean_or_one(self.sigma_sq_prior),
                    _prior_mean_or_one(self.tau_sq_prior),
                    self.phi_prior.mean,
                ],
            ]
        )

    def initial_scales(self) -> np.ndarray:
        scales = np.ones(self.k + 5)
        scales[self.k + 2 :] = 0.5
        return scales

    def adaptive(self) -> np.ndarray:
        mask = np.zeros(self.k + 5, dtype=bool)
        mask[: self.k] = True
        mask[self.k + 2 :] = True
        return mask

    def _log_scale_step(self, state, index, prior, scales, rng, build):
        """Metropolis on log x for one positive parameter"""
        theta, theta0 = state[: self.k], state[self.k]

        def log_target(log_value):
            value = math.exp(log_value)
            return self.mvn_logpdf(theta, theta0, build(value)) + float(prior.logpdf(value)) + log_value

        log_value, accepted = mh_logit_step(math.log(state[index]), log_target, scales[index], rng)
        state[index] = math.exp(log_value)
        return accepted

    def sweep(self, state, scales, rng):
        k = self.k
        flags = np.ones(k + 5, dtype=bool)
        theta0, sigma0_sq = state[k], state[k + 1]
        precision = self.precision(state)

        for i in range(k):
            cond_var = 1.0 / precision[i, i]
            others = np.delete(np.arange(k), i)
            cond_mean = theta0 - cond_var * precision[i, others] @ (state[others] - theta0)
            r_i, n_i = self.r[i], self.n[i]

            def log_target(value, cond_mean=cond_mean, cond_var=cond_var, r_i=r_i, n_i=n_i):
                return float(binomial_logit_loglik(value, r_i, n_i)) - (value - cond_mean) ** 2 / (2.0 * cond_var)

            state[i], flags[i] = mh_logit_step(state[i], log_target, scales[i], rng)

        ones = np.ones(k)
        theta = state[:k]
        post_precision = 1.0 / sigma0_sq + ones @ precision @ ones
        post_mean = (self.cfg.mu0 / sigma0_sq + ones @ precision @ theta) / post_precision
        state[k] = rng.generator.normal(post_mean, math.sqrt(1.0 / post_precision))
        state[k + 1] = gibbs_inverse_gamma_var([state[k] - self.cfg.mu0], self.cfg.sigma0_sq_shape, self.cfg.sigma0_sq_scale, rng)

        flags[k + 2] = self._log_scale_step(
            state, k + 2, self.sigma_sq_prior, scales, rng, lambda value: self.covariance(value, state[k + 3], state[k + 4])
        )
        flags[k + 3] = self._log_scale_step(
            state, k + 3, self.tau_sq_prior, scales, rng, lambda value: self.covariance(state[k + 2], value, state[k + 4])
        )
        flags[k + 4] = self._log_scale_step(
            state, k + 4, self.phi_prior, scales, rng, lambda value: self.covariance(state[k + 2], state[k + 3], value)
        )
        return flags

    def precision(self, state) -> np.ndarray:
        """Inverse of σ²Ω + τ²I at the current state"""
        k = self.k
        cov = self.covariance(state[k + 2], state[k + 3], state[k + 4])
        return linalg.cho_solve((np.linalg.cholesky(cov), True), np.eye(k))

    def record(self, state):
        k = self.k
        theta, theta0 = state[:k], state[k]
        precision = self.precision(state)
        diagonal = np.diag(precision)
        cond_var = 1.0 / diagonal
        cond_mean = theta0 - cond_var * (precision @ (theta - theta0) - diagonal * (theta - theta0))
        rate, _ = logit_normal_binomial(self.r, self.n, cond_mean, cond_var)
        return rate


@canonical_cohorts
def estimate_jin_cbhm(data: TrialData, cfg: JinConfig, mcmc: McmcConfig, rng: RngStream) -> EstimateVector:
    """Posterior means of expit(θ_i) under the correlated hierarchical model"""
    summary = run_chain(JinModel(data, cfg), mcmc, rng.child(0))
    return EstimateVector(tuple(summary.posterior_mean))
