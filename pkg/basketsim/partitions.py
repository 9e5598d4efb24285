"""
Partition engine

Exact enumeration of the set partitions of K cohorts and the posterior
over them. A partition is stored as a restricted growth string: cohort 0
is in block 0 and every later cohort either joins an existing block or
opens block max+1. That form is unique per grouping, so relabeling a
grouping never yields a second partition.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from basketsim import config
from basketsim.kernel import BetaParams, log_bb_marginal
from basketsim.models import DataValidationError, TrialData

logger = logging.getLogger("basketsim")


@dataclass(frozen=True)
class Partition:
    """A grouping of cohorts into blocks, in canonical form"""

    assignment: tuple[int, ...]

    def __post_init__(self):
        assignment = tuple(int(block) for block in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        highest = -1
        for block in assignment:
            if block < 0 or block > highest + 1:
                raise DataValidationError(f"partition {assignment} is not in canonical form")
            highest = max(highest, block)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Canonicalizes an arbitrary block labelling"""
        relabel = {}
        for label in labels:
            relabel.setdefault(label, len(relabel))
        return cls(tuple(relabel[label] for label in labels))

    def __len__(self):
        return len(self.assignment)

    @property
    def num_blocks(self) -> int:
        """Number of distinct blocks"""
        return max(self.assignment) + 1 if self.assignment else 0

    def blocks(self) -> list[list[int]]:
        """Cohort indices of each block, in block order"""
        members = [[] for _ in range(self.num_blocks)]
        for cohort, block in enumerate(self.assignment):
            members[block].append(cohort)
        return members


@dataclass(frozen=True)
class PartitionPosterior:
    """Prior, evidence and posterior probability of every partition"""

    partitions: tuple[Partition, ...]
    log_prior: tuple[float, ...]
    log_evidence: tuple[float, ...]
    posterior_prob: tuple[float, ...]

    def __len__(self):
        return len(self.partitions)


######################################################################
#  E N U M E R A T I O N
######################################################################
def _restricted_growth_strings(k: int):
    assignment = [0] * k

    def extend(position: int, highest: int):
        if position == k:
            yield tuple(assignment)
            return
        for block in range(highest + 2):
            assignment[position] = block
            yield from extend(position + 1, max(highest, block))

    yield from extend(1, 0)


@lru_cache(maxsize=None)
def _enumerate(k: int) -> tuple[Partition, ...]:
    return tuple(Partition(assignment) for assignment in _restricted_growth_strings(k))


def enumerate_partitions(k: int) -> list[Partition]:
    """Returns all Bell(k) partitions of k cohorts in lexicographic order

    :param k: number of cohorts, 2 <= k <= 12
    :type k: int

    :return: canonical partitions ordered by their assignment vectors
    :rtype: list

    """
    if not 2 <= k <= config.MAX_PARTITION_COHORTS:
        raise DataValidationError(f"k must lie in [2, {config.MAX_PARTITION_COHORTS}], got {k}")
    return list(_enumerate(k))


######################################################################
#  E V I D E N C E   A N D   P O S T E R I O R
######################################################################
def partition_log_evidence(part: Partition, data: TrialData, prior: BetaParams) -> float:
    """Sum over blocks of the pooled beta-binomial evidence"""
    if len(part) != data.k:
        raise DataValidationError(f"partition covers {len(part)} cohorts, trial has {data.k}")
    total = 0.0
    for block in part.blocks():
        total += log_bb_marginal(
            sum(data.cohorts[j].r for j in block),
            sum(data.cohorts[j].n for j in block),
            prior,
        )
    return total


def partition_posterior(data: TrialData, prior: BetaParams, model_prior_exponent: float) -> PartitionPosterior:
    """
    Posterior over all partitions of the trial's cohorts

    The model prior is proportional to num_blocks ** model_prior_exponent;
    exponent 0 weights every partition equally.
    """
    partitions = enumerate_partitions(data.k)
    blocks = np.array([part.num_blocks for part in partitions], dtype=float)
    log_prior = model_prior_exponent * np.log(blocks)
    log_prior = log_prior - logsumexp(log_prior)
    log_evidence = np.array([partition_log_evidence(part, data, prior) for part in partitions])
    log_post = log_prior + log_evidence
    log_post = log_post - np.max(log_post)
    posterior = np.exp(log_post - logsumexp(log_post))
    posterior = posterior / math.fsum(posterior)
    return PartitionPosterior(
        partitions=tuple(partitions),
        log_prior=tuple(float(value) for value in log_prior),
        log_evidence=tuple(float(value) for value in log_evidence),
        posterior_prob=tuple(float(value) for value in posterior),
    )


def map_partition(post: PartitionPosterior) -> Partition:
    """Most probable partition; ties go to fewer blocks, then enumeration order"""
    if len(post) == 0:
        raise DataValidationError("empty partition posterior")
    # compare unnormalized log scores so exact ties stay exact
    scores = [prior + evidence for prior, evidence in zip(post.log_prior, post.log_evidence)]
    best = max(scores)
    candidates = [index for index, score in enumerate(scores) if score == best]
    chosen = min(candidates, key=lambda index: (post.partitions[index].num_blocks, index))
    return post.partitions[chosen]
