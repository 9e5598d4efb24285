"""
Test cases for the MCMC engine
"""

import math
from unittest import TestCase

import numpy as np

from basketsim.kernel import InverseGamma, Normal, RngStream
from basketsim.mcmc import (
    ChainModel,
    McmcConfig,
    canonical_cohorts,
    gibbs_gamma_precision,
    gibbs_inverse_gamma_var,
    gibbs_normal_mean,
    initial_logits,
    mh_joint_scale,
    mh_joint_shift,
    mh_logit_block,
    mh_logit_step,
    normal_mean_posterior,
    run_chain,
)
from basketsim.models import DataValidationError, EstimateVector, EstimationError, TrialData

DRAWS = 20000


class StandardNormalModel(ChainModel):
    """One parameter sampled by random-walk Metropolis from N(0,1)"""

    parameter_names = ("x",)
    record_names = ("x", "x_sq")

    def initial_state(self):
        return np.array([3.0])

    def adaptive(self):
        return np.array([True])

    def sweep(self, state, scales, rng):
        state[0], accepted = mh_logit_step(state[0], lambda x: -0.5 * x * x, scales[0], rng)
        return np.array([float(accepted)])

    def record(self, state):
        return np.array([state[0], state[0] ** 2])


class NormalMeanModel(ChainModel):
    """A normal mean with a conjugate prior, sampled by Gibbs"""

    parameter_names = ("mu",)
    record_names = ("mu",)
    values = np.array([1.0, 2.0, 3.0])

    def initial_state(self):
        return np.array([0.0])

    def sweep(self, state, scales, rng):
        state[0] = gibbs_normal_mean(self.values, 1.0, 0.0, 100.0, rng)
        return np.zeros(1)


class DivergingModel(ChainModel):
    """Produces a non-finite state on its third sweep"""

    parameter_names = ("x",)
    record_names = ("x",)

    def __init__(self):
        self.calls = 0

    def initial_state(self):
        return np.array([0.0])

    def sweep(self, state, scales, rng):
        self.calls += 1
        state[0] = math.nan if self.calls == 3 else 1.0
        return np.zeros(1)


######################################################################
#  C O N F I G U R A T I O N   T E S T   C A S E S
######################################################################
class TestMcmcConfig(TestCase):
    """McmcConfig Tests"""

    def test_defaults(self):
        """It should default to 2000 burn-in and 8000 retained iterations"""
        config = McmcConfig()
        self.assertEqual(config.n_burn, 2000)
        self.assertEqual(config.n_keep, 8000)
        self.assertEqual(config.n_retained, 8000)
        self.assertEqual(McmcConfig(n_keep=100, thin=3).n_retained, 33)

    def test_invalid(self):
        """It should refuse invalid chain settings"""
        self.assertRaises(DataValidationError, McmcConfig, n_burn=-1)
        self.assertRaises(DataValidationError, McmcConfig, n_keep=0)
        self.assertRaises(DataValidationError, McmcConfig, thin=0)
        self.assertRaises(DataValidationError, McmcConfig, n_keep=5, thin=6)
        self.assertRaises(DataValidationError, McmcConfig, target_accept=1.0)


######################################################################
#  U P D A T E   S T E P   T E S T   C A S E S
######################################################################
class TestUpdateSteps(TestCase):
    """Gibbs and Metropolis step Tests"""

    def test_initial_logits(self):
        """It should start every cohort next to its observed rate"""
        data = TrialData.from_counts([10, 10], [0, 10])
        start = initial_logits(data)
        self.assertAlmostEqual(start[0], math.log(0.5 / 10.5), places=12)
        self.assertAlmostEqual(start[1], -start[0], places=12)

    def test_normal_mean_posterior(self):
        """It should combine prior and data precisions"""
        mean, var = normal_mean_posterior([1.0, 2.0, 3.0], 1.0, 0.0, 100.0)
        self.assertAlmostEqual(var, 1.0 / 3.01)
        self.assertAlmostEqual(mean, 6.0 / 3.01)
        mean, var = normal_mean_posterior([1.0, 5.0], 1.0, 0.0, 1e12, weights=[3.0, 1.0])
        self.assertAlmostEqual(mean, 2.0, places=6)
        self.assertAlmostEqual(var, 0.25, places=6)
        self.assertRaises(DataValidationError, normal_mean_posterior, [], 1.0, 0.0, 1.0)
        self.assertRaises(DataValidationError, normal_mean_posterior, [1.0], 0.0, 0.0, 1.0)

    def test_gibbs_normal_mean(self):
        """It should draw from the conjugate posterior of a normal mean"""
        rng = RngStream(1)
        draws = [gibbs_normal_mean([1.0, 2.0, 3.0], 1.0, 0.0, 100.0, rng) for _ in range(DRAWS)]
        var = 1.0 / 3.01
        self.assertAlmostEqual(np.mean(draws), 6.0 / 3.01, delta=3 * math.sqrt(var / DRAWS))
        self.assertAlmostEqual(np.var(draws), var, delta=0.02)

    def test_gibbs_inverse_gamma_var(self):
        """It should draw a variance from IG(shape + m/2, scale + SS/2)"""
        rng = RngStream(2)
        draws = [gibbs_inverse_gamma_var([1.0, -1.0, 2.0], 2.0, 1.0, rng) for _ in range(DRAWS)]
        # IG(3.5, 4): mean 1.6, variance 1.6² / 1.5
        self.assertAlmostEqual(np.mean(draws), 1.6, delta=3 * math.sqrt(1.6**2 / 1.5 / DRAWS))
        self.assertRaises(DataValidationError, gibbs_inverse_gamma_var, [], 2.0, 1.0, rng)

    def test_gibbs_gamma_precision(self):
        """It should draw a precision from Gamma(shape + m/2, rate + SS/2)"""
        rng = RngStream(3)
        draws = [gibbs_gamma_precision([1.0, -1.0, 2.0], 2.0, 1.0, rng) for _ in range(DRAWS)]
        self.assertAlmostEqual(np.mean(draws), 3.5 / 4.0, delta=3 * math.sqrt(3.5 / 16.0 / DRAWS))
        draws = [gibbs_gamma_precision([1.0, -1.0, 2.0], 2.0, 1.0, rng, weights=[2.0, 0.0, 0.0]) for _ in range(DRAWS)]
        self.assertAlmostEqual(np.mean(draws), 3.5 / 2.0, delta=3 * math.sqrt(3.5 / 4.0 / DRAWS))

    def test_mh_rejects_impossible_proposals(self):
        """It should never move to a point of zero density"""
        rng = RngStream(4)
        theta = 0.5
        for _ in range(200):
            theta, _ = mh_logit_step(theta, lambda x: 0.0 if x > 0 else -math.inf, 1.0, rng)
            self.assertGreater(theta, 0.0)

    def test_mh_needs_finite_start(self):
        """It should refuse to start from a point of zero density"""
        self.assertRaises(EstimationError, mh_logit_step, 0.0, lambda x: -math.inf, 1.0, RngStream(5))

    def test_mh_block(self):
        """It should update each component independently"""
        rng = RngStream(6)
        theta = np.zeros(3)
        theta, accepted = mh_logit_block(theta, lambda x: -0.5 * x * x, np.array([1.0, 0.0, 1.0]), rng)
        self.assertEqual(theta.shape, (3,))
        self.assertEqual(accepted.dtype, bool)
        # a zero scale proposes the current value
        self.assertEqual(theta[1], 0.0)


######################################################################
#  C H A I N   R U N N E R   T E S T   C A S E S
######################################################################
class TestRunChain(TestCase):
    """run_chain Tests"""

    def test_gibbs_chain(self):
        """It should summarize the draws of a conjugate chain"""
        summary = run_chain(NormalMeanModel(), McmcConfig(n_burn=10, n_keep=DRAWS), RngStream(7))
        self.assertEqual(summary.n_draws, DRAWS)
        self.assertAlmostEqual(summary.mean_of("mu"), 6.0 / 3.01, delta=0.015)
        self.assertAlmostEqual(summary.posterior_sd[0], math.sqrt(1.0 / 3.01), delta=0.02)
        self.assertIsNone(summary.kept_draws)

    def test_metropolis_chain(self):
        """It should adapt its proposal scale and sample a standard normal"""
        config = McmcConfig(n_burn=2000, n_keep=20000, adapt_window=2000)
        summary = run_chain(StandardNormalModel(), config, RngStream(8))
        self.assertAlmostEqual(summary.mean_of("x"), 0.0, delta=0.1)
        self.assertAlmostEqual(summary.mean_of("x_sq"), 1.0, delta=0.1)
        self.assertAlmostEqual(summary.accept_rate[0], 0.44, delta=0.15)

    def test_thinning_and_kept_draws(self):
        """It should keep every thin-th draw when asked"""
        config = McmcConfig(n_burn=0, n_keep=100, thin=10, keep_draws=True)
        summary = run_chain(NormalMeanModel(), config, RngStream(9))
        self.assertEqual(summary.n_draws, 10)
        self.assertEqual(summary.kept_draws.shape, (10, 1))

    def test_reproducible(self):
        """It should give identical summaries for identical streams"""
        config = McmcConfig(n_burn=100, n_keep=500)
        first = run_chain(StandardNormalModel(), config, RngStream(10, (1,)))
        second = run_chain(StandardNormalModel(), config, RngStream(10, (1,)))
        np.testing.assert_array_equal(first.posterior_mean, second.posterior_mean)

    def test_non_finite_state(self):
        """It should stop with an EstimationError on a non-finite state"""
        with self.assertRaises(EstimationError) as context:
            run_chain(DivergingModel(), McmcConfig(n_burn=5, n_keep=5), RngStream(11))
        self.assertIn("iteration 3", str(context.exception))


def flat(values):
    """A likelihood that ignores the data"""
    return np.zeros_like(values)


######################################################################
#  J O I N T   M O V E   T E S T   C A S E S
######################################################################
class TestJointMoves(TestCase):
    """mh_logit_step, mh_joint_scale and mh_joint_shift Tests"""

    def test_mh_standard_normal_long_run(self):
        """It should sample N(0,1) with the right mean and variance over 10^5 steps"""
        rng = RngStream(21)
        draws = np.empty(100000)
        x = 0.0
        for index in range(draws.size):
            x, _ = mh_logit_step(x, lambda value: -0.5 * value * value, 2.4, rng)
            draws[index] = x
        self.assertAlmostEqual(draws.mean(), 0.0, delta=0.02)
        self.assertAlmostEqual(draws.var(), 1.0, delta=0.05)

    def test_joint_scale_keeps_standardized_deviations(self):
        """It should rescale the deviations from the center with the spread"""
        rng = RngStream(22)
        theta = np.array([-1.0, 0.5, 2.0])
        for _ in range(50):
            moved, spread, _ = mh_joint_scale(theta, 0.5, 4.0, flat, lambda value: 0.0, 1.0, rng, power=0.5)
            np.testing.assert_allclose((moved - 0.5) / math.sqrt(spread), (theta - 0.5) / 2.0)
        moved, spread, accepted = mh_joint_scale(theta, 0.5, 4.0, flat, lambda value: 0.0, 0.0, rng)
        self.assertTrue(accepted)
        self.assertEqual(spread, 4.0)
        np.testing.assert_array_equal(moved, theta)

    def test_joint_scale_samples_the_spread_prior(self):
        """It should leave an inverse-gamma variance prior invariant when there is no data"""
        rng = RngStream(23)
        prior = InverseGamma(4.0, 3.0)
        sigma_sq, draws = 1.0, []
        for _ in range(DRAWS):
            theta = rng.generator.normal(0.0, math.sqrt(sigma_sq), size=3)
            _, sigma_sq, _ = mh_joint_scale(theta, 0.0, sigma_sq, flat, prior.logpdf, 0.8, rng, power=0.5)
            draws.append(sigma_sq)
        self.assertAlmostEqual(np.mean(draws), 1.0, delta=0.05)

    def test_joint_shift_samples_the_center_prior(self):
        """It should leave a normal prior of the common center invariant when there is no data"""
        rng = RngStream(24)
        prior = Normal(2.0, 1.0)
        mu, draws = 0.0, []
        for _ in range(DRAWS):
            theta = rng.generator.normal(mu, 1.0, size=3)
            _, mu, _ = mh_joint_shift(theta, mu, flat, prior.logpdf, 1.5, rng)
            draws.append(mu)
        self.assertAlmostEqual(np.mean(draws), 2.0, delta=0.05)
        self.assertAlmostEqual(np.var(draws), 1.0, delta=0.08)

    def test_joint_shift_moves_everything_together(self):
        """It should shift theta and the center by the same amount"""
        rng = RngStream(25)
        theta = np.array([0.0, 1.0])
        moved, mu, accepted = mh_joint_shift(theta, 0.5, lambda values: -0.5 * values**2, lambda value: 0.0, 1.0, rng)
        np.testing.assert_allclose(moved - theta, [mu - 0.5, mu - 0.5])
        self.assertEqual(accepted, mu != 0.5)


######################################################################
#  C O H O R T   O R D E R   T E S T   C A S E S
######################################################################
def positional(data, cfg, mcmc, rng):
    """An estimator that reports each cohort's position"""
    return EstimateVector(tuple(index / 10.0 for index in range(data.k)))


class TestCanonicalCohorts(TestCase):
    """canonical_cohorts Tests"""

    def test_sorted_and_restored(self):
        """It should estimate sorted cohorts and report them in the caller's order"""
        wrapped = canonical_cohorts(positional)
        data = TrialData.from_counts([10, 10, 20, 10], [5, 1, 2, 3])
        self.assertEqual(wrapped(data, None, None, None).estimates, (0.2, 0.0, 0.3, 0.1))

    def test_ties_are_averaged(self):
        """It should give cohorts with identical counts the same estimate"""
        wrapped = canonical_cohorts(positional)
        data = TrialData.from_counts([10, 10, 10, 10], [5, 1, 5, 3])
        self.assertEqual(wrapped(data, None, None, None).estimates, (0.25, 0.0, 0.25, 0.1))

    def test_permutation_equivariant(self):
        """It should permute the estimates exactly along with the cohorts"""
        wrapped = canonical_cohorts(positional)
        data = TrialData.from_counts([10] * 6, [1, 2, 3, 4, 5, 9])
        base = wrapped(data, None, None, None).estimates
        order = [5, 3, 1, 0, 2, 4]
        self.assertEqual(wrapped(data.permuted(order), None, None, None).estimates, tuple(base[i] for i in order))

    def test_validates_first(self):
        """It should refuse an invalid trial before estimating"""
        wrapped = canonical_cohorts(positional)
        self.assertRaises(DataValidationError, wrapped, TrialData.from_counts([10], [3]), None, None, None)
