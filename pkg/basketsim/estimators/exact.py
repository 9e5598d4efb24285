"""
Exact estimators

Estimators that need no Monte Carlo: the sample proportion, model
averaging over partitions, similarity-weighted Beta borrowing and the
local multiple-exchangeability model.
"""

import logging

import numpy as np

from basketsim.estimators.configs import FujikawaConfig, LiuConfig, PsiodaConfig
from basketsim.kernel import BetaParams, jsd_beta
from basketsim.models import DataValidationError, EstimateVector, TrialData, validate_trial
from basketsim.partitions import Partition, map_partition, partition_posterior

logger = logging.getLogger("basketsim")


def estimate_sample_proportion(data: TrialData) -> EstimateVector:
    """Observed r_i / n_i per cohort"""
    validate_trial(data)
    if any(cohort.n == 0 for cohort in data.cohorts):
        raise DataValidationError("sample proportion needs n >= 1 in every cohort")
    return EstimateVector(tuple(cohort.r / cohort.n for cohort in data.cohorts))


def _block_means(part: Partition, data: TrialData, prior: BetaParams) -> np.ndarray:
    """Posterior mean of each cohort's block-shared rate under one partition"""
    means = np.empty(data.k)
    for block in part.blocks():
        r = sum(data.cohorts[j].r for j in block)
        n = sum(data.cohorts[j].n for j in block)
        means[block] = prior.update(r, n).mean
    return means


######################################################################
#  M O D E L   A V E R A G I N G
######################################################################
def estimate_psioda_bma(data: TrialData, cfg: PsiodaConfig) -> EstimateVector:
    """Posterior-probability weighted average of block posterior means over all partitions"""
    validate_trial(data)
    prior = cfg.rate_prior
    posterior = partition_posterior(data, prior, cfg.model_prior_exponent)
    estimates = np.zeros(data.k)
    for part, weight in zip(posterior.partitions, posterior.posterior_prob):
        estimates += weight * _block_means(part, data, prior)
    return EstimateVector(tuple(estimates))


######################################################################
#  L O C A L   M E M
######################################################################
def estimate_liu_local_mem(data: TrialData, cfg: LiuConfig) -> EstimateVector:
    """Block-pooled Beta posterior means under the most probable partition"""
    validate_trial(data)
    prior = cfg.rate_prior
    best = map_partition(partition_posterior(data, prior, cfg.delta))
    logger.debug("MAP partition %s", best.assignment)
    return EstimateVector(tuple(_block_means(best, data, prior)))


######################################################################
#  S I M I L A R I T Y   W E I G H T E D   B O R R O W I N G
######################################################################
def fujikawa_weights(data: TrialData, cfg: FujikawaConfig) -> np.ndarray:
    """
    Borrowing weights from the Jensen-Shannon similarity of the cohorts'
    standalone Beta posteriors: w_ij = (1 - JSD_ij)^epsilon when the
    similarity exceeds tau, else 0; w_ii = 1.
    """
    posteriors = [cfg.rate_prior.update(cohort.r, cohort.n) for cohort in data.cohorts]
    weights = np.eye(data.k)
    for i in range(data.k):
        for j in range(i + 1, data.k):
            similarity = 1.0 - jsd_beta(posteriors[i], posteriors[j])
            weight = similarity**cfg.epsilon if similarity > cfg.tau else 0.0
            weights[i, j] = weights[j, i] = weight
    return weights


def estimate_fujikawa(data: TrialData, cfg: FujikawaConfig) -> EstimateVector:
    """Means of the similarity-weighted sums of Beta posterior shapes"""
    validate_trial(data)
    weights = fujikawa_weights(data, cfg)
    r = np.asarray(data.r, dtype=float)
    n = np.asarray(data.n, dtype=float)
    alpha = weights @ (cfg.prior_alpha + r)
    beta = weights @ (cfg.prior_beta + n - r)
    return EstimateVector(tuple(alpha / (alpha + beta)))
