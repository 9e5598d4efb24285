"""
Statistical kernel

Special functions, the probability distributions the estimators sample
from, logit/expit and the two distances between Beta distributions.

Evidence convention: ``log_bb_marginal`` returns the beta-binomial
integrated likelihood WITHOUT the binomial coefficient. The coefficient
depends on the data only, so it cancels from every ratio of model
evidences (posterior model probabilities, MAP partitions).

Parameterizations:

* Normal(mean, var) is given by its VARIANCE.
* Gamma(shape, rate) has density ∝ x^(shape-1) exp(-rate x).
* InverseGamma(shape, scale) has density ∝ x^(-shape-1) exp(-scale/x).
* HalfNormal(scale) is |X| for X ~ N(0, scale²).
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from basketsim.models import DataValidationError, EstimationError

logger = logging.getLogger("basketsim")

LOG_2 = math.log(2.0)
LOG_2PI = math.log(2.0 * math.pi)

# Gauss-Legendre nodes used by jsd_beta
QUADRATURE_NODES = 512
# largest tolerated |mass - 1| of a Beta density on the quadrature grid
QUADRATURE_MASS_TOLERANCE = 1e-2


######################################################################
#  R A N D O M   S T R E A M S
######################################################################
class RngStream:
    """
    Deterministic pseudo-random stream addressed by a master seed and a
    path of integer indices (scenario, sample size, replication, method,
    chain). Streams for parallel work are derived with ``child``; a live
    stream is never split.
    """

    def __init__(self, seed: int, path=()):
        self.seed = int(seed)
        self.path = tuple(int(index) for index in path)
        if self.seed < 0 or any(index < 0 for index in self.path):
            raise DataValidationError("seed and path indices must be nonnegative")
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def __repr__(self):
        return f"<RngStream seed={self.seed} path={self.path}>"

    def child(self, *indices: int) -> "RngStream":
        """Returns a fresh stream one or more levels below this one"""
        return RngStream(self.seed, self.path + tuple(indices))


######################################################################
#  L O G I T   A N D   S P E C I A L   F U N C T I O N S
######################################################################
def logit(p):
    """Returns log(p/(1-p)) for p in the open interval (0,1)"""
    values = np.asarray(p, dtype=float)
    if not np.all((values > 0.0) & (values < 1.0)):
        raise DataValidationError(f"logit is defined on (0,1) only, got {p!r}")
    result = special.logit(values)
    return float(result) if result.ndim == 0 else result


def expit(theta):
    """Returns 1/(1+exp(-theta)) without overflow for any real theta"""
    result = special.expit(np.asarray(theta, dtype=float))
    return float(result) if result.ndim == 0 else result


def log_beta(a: float, b: float) -> float:
    """Returns log B(a, b)"""
    if not (a > 0 and b > 0):
        raise DataValidationError(f"log_beta needs positive arguments, got ({a}, {b})")
    return float(special.betaln(a, b))


def binomial_logit_loglik(theta, r, n):
    """Binomial log-likelihood on the logit scale, without the coefficient"""
    return r * theta - n * np.logaddexp(0.0, theta)


# Gauss-Hermite nodes and Newton steps of logit_normal_binomial
HERMITE_NODES = 40
NEWTON_STEPS = 12
# smallest prior variance logit_normal_binomial works with
MIN_PRIOR_VAR = 1e-14


@lru_cache(maxsize=4)
def _hermite_grid(nodes: int):
    points, weights = np.polynomial.hermite_e.hermegauss(nodes)
    return points, np.log(weights)


def logit_normal_binomial(r, n, mean, var):
    """
    Posterior mean of the rate expit(θ) and log evidence of r responders
    in n patients when θ ~ N(mean, var)

    Gauss-Hermite quadrature centered on the posterior mode and scaled by
    its curvature. All arguments broadcast; the evidence omits the
    binomial coefficient like ``log_bb_marginal``.
    """
    r, n, mean, var = np.broadcast_arrays(*(np.asarray(value, dtype=float) for value in (r, n, mean, var)))
    var = np.maximum(var, MIN_PRIOR_VAR)
    p_hat = (r + 0.5) / (n + 1.0)
    info = (n + 1.0) * p_hat * (1.0 - p_hat)
    mode = (mean / var + info * np.log(p_hat / (1.0 - p_hat))) / (1.0 / var + info)
    for _ in range(NEWTON_STEPS):
        p = special.expit(mode)
        gradient = r - n * p - (mode - mean) / var
        curvature = n * p * (1.0 - p) + 1.0 / var
        mode = mode + np.clip(gradient / curvature, -2.0, 2.0)
    p = special.expit(mode)
    spread = 1.0 / np.sqrt(n * p * (1.0 - p) + 1.0 / var)

    x, log_w = _hermite_grid(HERMITE_NODES)
    theta = mode[..., None] + spread[..., None] * x
    log_density = (
        binomial_logit_loglik(theta, r[..., None], n[..., None])
        - (theta - mean[..., None]) ** 2 / (2.0 * var[..., None])
        - 0.5 * (LOG_2PI + np.log(var[..., None]))
    )
    log_terms = log_density + 0.5 * x**2 + log_w
    log_mass = special.logsumexp(log_terms, axis=-1)
    rate = np.sum(np.exp(log_terms - log_mass[..., None]) * special.expit(theta), axis=-1)
    return rate, log_mass + np.log(spread)


######################################################################
#  D I S T R I B U T I O N S
######################################################################
def _positive(name: str, value: float):
    if not (value > 0 and math.isfinite(value)):
        raise DataValidationError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class BetaParams:
    """Shapes of a Beta(alpha, beta) distribution"""

    alpha: float
    beta: float

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)

    @property
    def mean(self) -> float:
        """Mean alpha/(alpha+beta)"""
        return self.alpha / (self.alpha + self.beta)

    def update(self, r: int, n: int) -> "BetaParams":
        """Conjugate posterior after r responses in n patients"""
        return BetaParams(self.alpha + r, self.beta + n - r)

    def logpdf(self, x):
        """Log density, evaluated in log space so endpoints stay finite"""
        x = np.asarray(x, dtype=float)
        return (self.alpha - 1.0) * np.log(x) + (self.beta - 1.0) * np.log1p(-x) - special.betaln(self.alpha, self.beta)

    def sample(self, generator: np.random.Generator) -> float:
        """One Beta draw"""
        return float(generator.beta(self.alpha, self.beta))


@dataclass(frozen=True)
class Normal:
    """Normal distribution parameterized by mean and VARIANCE"""

    mean: float
    var: float

    def __post_init__(self):
        _positive("var", self.var)

    def logpdf(self, x):
        """Log density"""
        return -0.5 * (LOG_2PI + math.log(self.var)) - (x - self.mean) ** 2 / (2.0 * self.var)

    def sample(self, generator: np.random.Generator) -> float:
        """One normal draw"""
        return float(generator.normal(self.mean, math.sqrt(self.var)))


@dataclass(frozen=True)
class Gamma:
    """Gamma distribution with shape and RATE"""

    shape: float
    rate: float

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("rate", self.rate)

    @property
    def mean(self) -> float:
        """Mean shape/rate"""
        return self.shape / self.rate

    def logpdf(self, x):
        """Log density on x > 0"""
        return (
            self.shape * math.log(self.rate)
            - special.gammaln(self.shape)
            + (self.shape - 1.0) * np.log(x)
            - self.rate * x
        )

    def sample(self, generator: np.random.Generator) -> float:
        """One gamma draw"""
        return float(generator.gamma(self.shape, 1.0 / self.rate))


@dataclass(frozen=True)
class InverseGamma:
    """Inverse-gamma distribution with shape and SCALE"""

    shape: float
    scale: float

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    @property
    def mean(self):
        """Mean scale/(shape-1), or None when shape <= 1"""
        return self.scale / (self.shape - 1.0) if self.shape > 1.0 else None

    def logpdf(self, x):
        """Log density on x > 0"""
        return (
            self.shape * math.log(self.scale)
            - special.gammaln(self.shape)
            - (self.shape + 1.0) * np.log(x)
            - self.scale / x
        )

    def sample(self, generator: np.random.Generator) -> float:
        """One inverse-gamma draw"""
        return float(self.scale / generator.gamma(self.shape, 1.0))


@dataclass(frozen=True)
class HalfNormal:
    """Half-normal distribution |X|, X ~ N(0, scale²)"""

    scale: float

    def __post_init__(self):
        _positive("scale", self.scale)

    def logpdf(self, x):
        """Log density on x >= 0"""
        return LOG_2 - 0.5 * LOG_2PI - math.log(self.scale) - x**2 / (2.0 * self.scale**2)

    def sample(self, generator: np.random.Generator) -> float:
        """One half-normal draw"""
        return float(abs(generator.normal(0.0, self.scale)))


@dataclass(frozen=True)
class Binomial:
    """Binomial distribution with n trials and success probability p"""

    n: int
    p: float

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise DataValidationError(f"n must be a nonnegative integer, got {self.n!r}")
        if not 0.0 <= self.p <= 1.0:
            raise DataValidationError(f"p must lie in [0,1], got {self.p}")

    def sample(self, generator: np.random.Generator) -> int:
        """One binomial count"""
        return int(generator.binomial(self.n, self.p))


def sample_distribution(kind, rng: RngStream):
    """Draws once from a Normal, Gamma, InverseGamma, HalfNormal, BetaParams or Binomial"""
    if not hasattr(kind, "sample"):
        raise DataValidationError(f"cannot sample from {kind!r}")
    return kind.sample(rng.generator)


######################################################################
#  E V I D E N C E   A N D   D I S T A N C E S
######################################################################
def log_bb_marginal(r: int, n: int, prior: BetaParams) -> float:
    """Returns log[B(a+r, b+n-r)/B(a,b)], the beta-binomial evidence without C(n,r)"""
    if r < 0 or n < 0 or r > n:
        raise DataValidationError(f"invalid counts r={r}, n={n}")
    if not isinstance(prior, BetaParams):
        raise DataValidationError(f"expected BetaParams, got {prior!r}")
    if n == 0:
        return 0.0
    return float(special.betaln(prior.alpha + r, prior.beta + n - r) - special.betaln(prior.alpha, prior.beta))


def hellinger_beta(p: BetaParams, q: BetaParams) -> float:
    """Hellinger distance between two Beta distributions, in [0,1]"""
    if p == q:
        return 0.0
    log_coefficient = special.betaln((p.alpha + q.alpha) / 2.0, (p.beta + q.beta) / 2.0) - 0.5 * (
        special.betaln(p.alpha, p.beta) + special.betaln(q.alpha, q.beta)
    )
    squared = 1.0 - math.exp(log_coefficient)
    # round-off can push identical-looking distributions slightly negative
    return math.sqrt(max(squared, 0.0))


@lru_cache(maxsize=4)
def _legendre_grid(nodes: int):
    points, weights = np.polynomial.legendre.leggauss(nodes)
    return (points + 1.0) / 2.0, weights / 2.0


def _jsd_beta_adaptive(p: BetaParams, q: BetaParams) -> float:
    """Adaptive quadrature for densities with an endpoint singularity"""

    def term(x, own, other):
        log_f = float(own.logpdf(x))
        if not math.isfinite(log_f):
            return 0.0
        log_m = float(np.logaddexp(log_f, other.logpdf(x))) - LOG_2
        return math.exp(log_f) * (log_f - log_m)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        kl_fm, _ = integrate.quad(term, 0.0, 1.0, args=(p, q), limit=200)
        kl_gm, _ = integrate.quad(term, 0.0, 1.0, args=(q, p), limit=200)
    for warning in caught:
        logger.warning("JSD quadrature for %s and %s: %s", p, q, " ".join(str(warning.message).split()))
    divergence = (0.5 * kl_fm + 0.5 * kl_gm) / LOG_2
    return float(min(max(divergence, 0.0), 1.0))


def jsd_beta(p: BetaParams, q: BetaParams) -> float:
    """Jensen-Shannon divergence (base 2) between two Beta distributions, in [0,1]"""
    if p == q:
        return 0.0
    if min(p.alpha, p.beta, q.alpha, q.beta) < 1.0:
        return _jsd_beta_adaptive(p, q)
    x, w = _legendre_grid(QUADRATURE_NODES)
    log_f = p.logpdf(x)
    log_g = q.logpdf(x)
    mass_f = float(np.sum(w * np.exp(log_f)))
    mass_g = float(np.sum(w * np.exp(log_g)))
    if abs(mass_f - 1.0) > QUADRATURE_MASS_TOLERANCE or abs(mass_g - 1.0) > QUADRATURE_MASS_TOLERANCE:
        raise EstimationError(f"JSD quadrature did not converge for {p} and {q} (mass {mass_f:.4g}, {mass_g:.4g})")
    log_f = log_f - math.log(mass_f)
    log_g = log_g - math.log(mass_g)
    log_m = np.logaddexp(log_f, log_g) - LOG_2
    f = np.exp(log_f)
    g = np.exp(log_g)
    kl_fm = np.sum(w * np.where(f > 0.0, f * (log_f - log_m), 0.0))
    kl_gm = np.sum(w * np.where(g > 0.0, g * (log_g - log_m), 0.0))
    divergence = (0.5 * kl_fm + 0.5 * kl_gm) / LOG_2
    return float(min(max(divergence, 0.0), 1.0))
