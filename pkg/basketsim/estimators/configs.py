"""
Estimator configurations

One frozen dataclass per method, defaulting to the uninformative prior
choices used for the simulation grid. Normal second parameters are
variances throughout.
"""

from dataclasses import dataclass, fields, replace

from basketsim.kernel import BetaParams, logit
from basketsim.models import DataValidationError, MethodId


def _require(condition: bool, message: str):
    if not condition:
        raise DataValidationError(message)


def _positive(config, *names: str):
    for name in names:
        value = getattr(config, name)
        _require(value > 0, f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class BerryConfig:
    """Exchangeable BHM: θ_i ~ N(μ, σ²), μ ~ N(mu0, sigma0_sq), σ² ~ IG(lambda1, lambda2)"""

    mu0: float = 0.0
    sigma0_sq: float = 100.0
    lambda1: float = 0.0005
    lambda2: float = 0.00005

    def __post_init__(self):
        _positive(self, "sigma0_sq", "lambda1", "lambda2")


@dataclass(frozen=True)
class ExnexConfig:
    """
    EX/NEX mixture: EX θ_i ~ N(μ, σ²) with μ ~ N(mu0_mean, mu0_var) and
    σ ~ half-normal(sigma0_halfnormal_scale); NEX θ_i ~ N(nex_mean, nex_var).
    """

    ex_weight: float = 0.5
    mu0_mean: float = 0.0
    mu0_var: float = 10.0
    sigma0_halfnormal_scale: float = 1.0
    nex_mean: float = 0.0
    nex_var: float = 10.0

    def __post_init__(self):
        _require(0.0 <= self.ex_weight <= 1.0, "ex_weight must lie in [0,1]")
        _positive(self, "mu0_var", "sigma0_halfnormal_scale", "nex_var")


@dataclass(frozen=True)
class PsiodaConfig:
    """Model averaging over partitions with prior ∝ num_blocks ** model_prior_exponent"""

    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    model_prior_exponent: float = 1.0

    def __post_init__(self):
        _positive(self, "prior_alpha", "prior_beta")

    @property
    def rate_prior(self) -> BetaParams:
        """Beta prior of each block's response rate"""
        return BetaParams(self.prior_alpha, self.prior_beta)


@dataclass(frozen=True)
class FujikawaConfig:
    """JSD-similarity borrowing with threshold tau and sharpening exponent epsilon"""

    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    tau: float = 0.5
    epsilon: float = 2.0

    def __post_init__(self):
        _positive(self, "prior_alpha", "prior_beta")
        _require(0.0 <= self.tau <= 1.0, "tau must lie in [0,1]")
        _require(self.epsilon >= 0.0, "epsilon must be >= 0")

    @property
    def rate_prior(self) -> BetaParams:
        """Beta prior of each cohort's response rate"""
        return BetaParams(self.prior_alpha, self.prior_beta)


@dataclass(frozen=True)
class JinConfig:
    """
    Correlated BHM: θ = θ0·1 + η + ε, η ~ MVN(0, σ²Ω), ε_i ~ N(0, τ²),
    Ω_ij = exp(-φ d_ij²), θ0 ~ N(mu0, σ0²).
    """

    mu0: float = 0.0
    sigma0_sq_shape: float = 0.1
    sigma0_sq_scale: float = 0.1
    sigma_sq_shape: float = 0.01
    sigma_sq_scale: float = 0.01
    tau_sq_shape: float = 0.01
    tau_sq_scale: float = 0.01
    phi_shape: float = 1.5
    phi_rate: float = 1.0

    def __post_init__(self):
        _positive(
            self,
            "sigma0_sq_shape",
            "sigma0_sq_scale",
            "sigma_sq_shape",
            "sigma_sq_scale",
            "tau_sq_shape",
            "tau_sq_scale",
            "phi_shape",
            "phi_rate",
        )


@dataclass(frozen=True)
class ChenLeeConfig:
    """
    Cluster BHM: Dirichlet-process co-clustering of observed rates, then
    θ_j ~ N(μ1, 1/(τ1 m_j)), μ1 ~ N(mu2, 1/tau2), τ1 ~ Gamma(tau1_shape, tau1_rate).
    """

    crp_alpha: float = 1e-60
    sigma_d_sq: float = 0.001
    base_mean: float = 0.2
    base_var: float = 10.0
    mu2: float = 0.0
    tau2: float = 0.1
    tau1_shape: float = 50.0
    tau1_rate: float = 10.0
    crp_iterations: int = 5000
    crp_burn: int = 500

    def __post_init__(self):
        _positive(self, "crp_alpha", "sigma_d_sq", "base_var", "tau2", "tau1_shape", "tau1_rate", "crp_iterations")
        _require(self.crp_burn >= 0, "crp_burn must be >= 0")


@dataclass(frozen=True)
class LiuConfig:
    """Local MEM: MAP partition under prior ∝ num_blocks ** delta"""

    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        _positive(self, "prior_alpha", "prior_beta")

    @property
    def rate_prior(self) -> BetaParams:
        """Beta prior of each block's response rate"""
        return BetaParams(self.prior_alpha, self.prior_beta)


@dataclass(frozen=True)
class MethodConfigs:
    """Configuration of every Bayesian estimator, keyed like the run-config sections"""

    berry: BerryConfig = BerryConfig()
    exnex: ExnexConfig = ExnexConfig()
    psioda: PsiodaConfig = PsiodaConfig()
    fujikawa: FujikawaConfig = FujikawaConfig()
    jin: JinConfig = JinConfig()
    chen_lee: ChenLeeConfig = ChenLeeConfig()
    liu: LiuConfig = LiuConfig()

    @classmethod
    def sections(cls) -> tuple[str, ...]:
        """Section names in declaration order"""
        return tuple(field.name for field in fields(cls))

    def for_method(self, method: MethodId):
        """Configuration used by one method (None for the sample proportion)"""
        return getattr(self, SECTION_BY_METHOD[method]) if method in SECTION_BY_METHOD else None


SECTION_BY_METHOD = {
    MethodId.BERRY_BHM: "berry",
    MethodId.EXNEX: "exnex",
    MethodId.PSIODA_BMA: "psioda",
    MethodId.FUJIKAWA: "fujikawa",
    MethodId.JIN_CBHM: "jin",
    MethodId.CHEN_LEE_BCHM: "chen_lee",
    MethodId.LIU_LOCAL_MEM: "liu",
}


def apply_prior_mean(method_configs: MethodConfigs, prior_mean: float) -> MethodConfigs:
    """
    Re-centers every prior on prior_mean

    Beta-prior methods get Beta(2·m, 2·(1-m)), keeping a total prior weight
    of 2; logit-scale methods move their location to logit(m). Every other
    parameter is left alone.
    """
    if not 0.0 < prior_mean < 1.0:
        raise DataValidationError(f"prior_mean must lie in (0,1), got {prior_mean}")
    alpha = 2.0 * prior_mean
    beta = 2.0 * (1.0 - prior_mean)
    location = 0.0 if prior_mean == 0.5 else logit(prior_mean)
    return replace(
        method_configs,
        berry=replace(method_configs.berry, mu0=location),
        exnex=replace(method_configs.exnex, mu0_mean=location, nex_mean=location),
        psioda=replace(method_configs.psioda, prior_alpha=alpha, prior_beta=beta),
        fujikawa=replace(method_configs.fujikawa, prior_alpha=alpha, prior_beta=beta),
        jin=replace(method_configs.jin, mu0=location),
        chen_lee=replace(method_configs.chen_lee, mu2=location),
        liu=replace(method_configs.liu, prior_alpha=alpha, prior_beta=beta),
    )
