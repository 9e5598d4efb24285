"""
Test cases for the partition engine
"""

import itertools
import math
from unittest import TestCase

from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from basketsim.kernel import BetaParams
from basketsim.models import DataValidationError, TrialData
from basketsim.partitions import (
    Partition,
    enumerate_partitions,
    map_partition,
    partition_log_evidence,
    partition_posterior,
)


def bell_numbers(upto: int) -> list[int]:
    """Bell numbers 0..upto from the Bell triangle"""
    row = [1]
    numbers = [1]
    for _ in range(upto):
        next_row = [row[-1]]
        for value in row:
            next_row.append(next_row[-1] + value)
        row = next_row
        numbers.append(row[0])
    return numbers


######################################################################
#  E N U M E R A T I O N   T E S T   C A S E S
######################################################################
class TestEnumeration(TestCase):
    """enumerate_partitions Tests"""

    def test_bell_counts(self):
        """It should enumerate Bell(k) partitions"""
        bell = bell_numbers(8)
        self.assertEqual(bell[2:8], [2, 5, 15, 52, 203, 877])
        for k in range(2, 8):
            self.assertEqual(len(enumerate_partitions(k)), bell[k])

    def test_lexicographic_and_unique(self):
        """It should list distinct canonical partitions in lexicographic order"""
        assignments = [part.assignment for part in enumerate_partitions(5)]
        self.assertEqual(assignments, sorted(assignments))
        self.assertEqual(len(set(assignments)), len(assignments))
        self.assertEqual(assignments[0], (0, 0, 0, 0, 0))
        self.assertEqual(assignments[-1], (0, 1, 2, 3, 4))

    def test_three_cohorts(self):
        """It should enumerate the five groupings of three cohorts"""
        self.assertEqual(
            [part.assignment for part in enumerate_partitions(3)],
            [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (0, 1, 2)],
        )

    def test_k_out_of_range(self):
        """It should refuse fewer than two or more than twelve cohorts"""
        self.assertRaises(DataValidationError, enumerate_partitions, 1)
        self.assertRaises(DataValidationError, enumerate_partitions, 13)


######################################################################
#  P A R T I T I O N   T E S T   C A S E S
######################################################################
class TestPartition(TestCase):
    """Partition Tests"""

    def test_canonical_form(self):
        """It should only accept restricted growth strings"""
        self.assertRaises(DataValidationError, Partition, (1, 0))
        self.assertRaises(DataValidationError, Partition, (0, 2))
        self.assertRaises(DataValidationError, Partition, (0, -1))

    def test_from_labels(self):
        """It should canonicalize arbitrary labels"""
        self.assertEqual(Partition.from_labels(["b", "a", "b", "c"]).assignment, (0, 1, 0, 2))
        self.assertEqual(Partition.from_labels((7, 7, 3)), Partition((0, 0, 1)))

    def test_blocks(self):
        """It should list the cohorts of each block"""
        part = Partition((0, 1, 0, 2, 1))
        self.assertEqual(part.num_blocks, 3)
        self.assertEqual(part.blocks(), [[0, 2], [1, 4], [3]])
        self.assertEqual(len(part), 5)

    def test_evidence_pools_blocks(self):
        """It should pool counts inside a block"""
        data = TrialData.from_counts([1, 1], [1, 0])
        uniform = BetaParams(1.0, 1.0)
        # pooled: r=1 of n=2 gives B(2,2)/B(1,1) = 1/6
        self.assertAlmostEqual(partition_log_evidence(Partition((0, 0)), data, uniform), math.log(1.0 / 6.0))
        self.assertAlmostEqual(partition_log_evidence(Partition((0, 1)), data, uniform), math.log(0.25))
        self.assertRaises(DataValidationError, partition_log_evidence, Partition((0, 0, 1)), data, uniform)


######################################################################
#  P O S T E R I O R   T E S T   C A S E S
######################################################################
@st.composite
def small_trials(draw):
    """Trials of 2 to 5 cohorts"""
    n = draw(st.lists(st.integers(min_value=0, max_value=60), min_size=2, max_size=5))
    r = [draw(st.integers(min_value=0, max_value=n_i)) for n_i in n]
    return TrialData.from_counts(n, r)


class TestPosterior(TestCase):
    """partition_posterior and map_partition Tests"""

    def test_two_cohort_posterior(self):
        """It should weigh pooled and split groupings by their evidence"""
        data = TrialData.from_counts([1, 1], [1, 0])
        post = partition_posterior(data, BetaParams(1.0, 1.0), 0.0)
        # evidence 1/6 against 1/4 with equal prior weight
        self.assertAlmostEqual(post.posterior_prob[0], 0.4, places=12)
        self.assertAlmostEqual(post.posterior_prob[1], 0.6, places=12)

    def test_model_prior(self):
        """It should weight partitions by num_blocks to the exponent"""
        data = TrialData.from_counts([0, 0, 0], [0, 0, 0])
        post = partition_posterior(data, BetaParams(1.0, 1.0), 1.0)
        # no data: posterior equals prior 1:2:2:2:3 over the five groupings
        expected = [1 / 10, 2 / 10, 2 / 10, 2 / 10, 3 / 10]
        for value, target in zip(post.posterior_prob, expected):
            self.assertAlmostEqual(value, target, places=12)

    @settings(max_examples=40, deadline=None)
    @given(small_trials(), st.floats(min_value=0.0, max_value=3.0))
    def test_posterior_sums_to_one(self, data, exponent):
        """It should return a probability distribution over partitions"""
        post = partition_posterior(data, BetaParams(0.5, 0.5), exponent)
        self.assertAlmostEqual(math.fsum(post.posterior_prob), 1.0, places=12)
        self.assertTrue(all(value >= 0.0 for value in post.posterior_prob))
        self.assertEqual(len(post), len(enumerate_partitions(data.k)))

    def test_map_prefers_fewer_blocks_on_ties(self):
        """It should break exact ties toward fewer blocks"""
        data = TrialData.from_counts([0, 0, 0, 0], [0, 0, 0, 0])
        post = partition_posterior(data, BetaParams(1.0, 1.0), 0.0)
        self.assertEqual(map_partition(post).assignment, (0, 0, 0, 0))

    def test_map_finds_separated_groups(self):
        """It should group cohorts with clearly different rates apart"""
        data = TrialData.from_counts([40, 40, 40, 40], [2, 38, 1, 39])
        post = partition_posterior(data, BetaParams(1.0, 1.0), 0.0)
        self.assertEqual(map_partition(post).assignment, (0, 1, 0, 1))

    def test_pooled_evidence_for_equal_proportions(self):
        """It should favor pooling two cohorts with equal proportions, as brute-force quadrature does"""

        def evidence(r: int, n: int) -> float:
            value, _ = integrate.quad(lambda p: p**r * (1.0 - p) ** (n - r), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
            return value

        checked = 0
        for n1, n2 in itertools.product(range(1, 6), repeat=2):
            for r1, r2 in itertools.product(range(n1 + 1), range(n2 + 1)):
                if r1 * n2 != r2 * n1:
                    continue
                pooled = evidence(r1 + r2, n1 + n2)
                split = evidence(r1, n1) * evidence(r2, n2)
                self.assertGreaterEqual(pooled, split, (n1, n2, r1, r2))
                post = partition_posterior(TrialData.from_counts([n1, n2], [r1, r2]), BetaParams(1.0, 1.0), 0.0)
                self.assertGreaterEqual(post.posterior_prob[0], post.posterior_prob[1])
                self.assertAlmostEqual(
                    post.log_evidence[0] - post.log_evidence[1], math.log(pooled) - math.log(split), places=8
                )
                checked += 1
        self.assertGreater(checked, 25)
