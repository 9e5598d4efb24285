"""
Package: estimators
Response-rate estimators for basket trials and their configurations
"""

from basketsim.estimators.configs import (
    SECTION_BY_METHOD,
    BerryConfig,
    ChenLeeConfig,
    ExnexConfig,
    FujikawaConfig,
    JinConfig,
    LiuConfig,
    MethodConfigs,
    PsiodaConfig,
    apply_prior_mean,
)
from basketsim.estimators.exact import (
    estimate_fujikawa,
    estimate_liu_local_mem,
    estimate_psioda_bma,
    estimate_sample_proportion,
    fujikawa_weights,
)
from basketsim.estimators.hierarchical import estimate_berry_bhm, estimate_exnex, estimate_jin_cbhm, hellinger_matrix
from basketsim.estimators.clustering import crp_cocluster_matrix, estimate_chen_lee_bchm
from basketsim.kernel import RngStream
from basketsim.mcmc import McmcConfig
from basketsim.models import EstimateVector, MethodId, TrialData

_EXACT = {
    MethodId.PSIODA_BMA: estimate_psioda_bma,
    MethodId.FUJIKAWA: estimate_fujikawa,
    MethodId.LIU_LOCAL_MEM: estimate_liu_local_mem,
}

_SAMPLED = {
    MethodId.BERRY_BHM: estimate_berry_bhm,
    MethodId.EXNEX: estimate_exnex,
    MethodId.JIN_CBHM: estimate_jin_cbhm,
    MethodId.CHEN_LEE_BCHM: estimate_chen_lee_bchm,
}


def estimate(
    method: MethodId, data: TrialData, configs: MethodConfigs, mcmc: McmcConfig, rng: RngStream
) -> EstimateVector:
    """Runs one estimator with its configuration from configs"""
    if method is MethodId.SAMPLE_PROPORTION:
        return estimate_sample_proportion(data)
    cfg = configs.for_method(method)
    if method in _EXACT:
        return _EXACT[method](data, cfg)
    return _SAMPLED[method](data, cfg, mcmc, rng)
