"""
Simulation harness

Scenario table, trial generation, replication orchestration and the
evaluation metrics (mean absolute bias, mean MSE, shrinkage).

Random streams are addressed by path so every number is reproducible from
the master seed alone:

* trial of replication ``rep``: (scenario index, n, rep)
* method ``m`` on that trial:   (scenario index, n, rep, method index)

The scenario index is the row of the scenario in the full table and the
method index its position in ``MethodId``, so selecting a subset of
scenarios or methods never changes the numbers of the others.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from basketsim import config
from basketsim.estimators import MethodConfigs, apply_prior_mean, estimate
from basketsim.kernel import Binomial, RngStream
from basketsim.mcmc import McmcConfig
from basketsim.models import (
    BasketSimError,
    CohortData,
    DataValidationError,
    MethodId,
    Scenario,
    SimulationAbortedError,
    TrialData,
)

logger = logging.getLogger("basketsim")

DEFAULT_SAMPLE_SIZES = (10, 20, 30, 100)
# largest tolerated share of failed replications per method and cell
MAX_FAILURE_RATE = 0.01
# replication chunks handed to each worker
CHUNKS_PER_WORKER = 4

METHOD_INDEX = {method: index for index, method in enumerate(MethodId)}


######################################################################
#  S C E N A R I O S
######################################################################
# fmt: off
SCENARIOS = (
    Scenario("1.A.1", (0.1, 0.1, 0.1, 0.1, 0.1, 0.1)),
    Scenario("1.A.2", (0.3, 0.3, 0.3, 0.3, 0.3, 0.3)),
    Scenario("1.A.3", (0.5, 0.5, 0.5, 0.5, 0.5, 0.5)),
    Scenario("1.B.1", (0.4375, 0.4625, 0.4875, 0.5125, 0.5375, 0.5625)),
    Scenario("1.B.2", (0.375, 0.425, 0.475, 0.525, 0.575, 0.625)),
    Scenario("1.B.3", (0.2375, 0.2625, 0.2875, 0.3125, 0.3375, 0.3625)),
    Scenario("1.B.4", (0.175, 0.225, 0.275, 0.325, 0.375, 0.425)),
    Scenario("2.A.1", (0.3, 0.5, 0.5, 0.5, 0.5, 0.5)),
    Scenario("2.A.2", (0.3, 0.3, 0.3, 0.5, 0.5, 0.5)),
    Scenario("2.A.3", (0.3, 0.3, 0.3, 0.3, 0.3, 0.5)),
    Scenario("2.B.1", (0.1, 0.3, 0.3, 0.3, 0.3, 0.3)),
    Scenario("2.B.2", (0.1, 0.1, 0.1, 0.3, 0.3, 0.3)),
    Scenario("2.B.3", (0.1, 0.1, 0.1, 0.1, 0.1, 0.3)),
    Scenario("2.C.1", (0.1, 0.5, 0.5, 0.5, 0.5, 0.5)),
    Scenario("2.C.2", (0.1, 0.1, 0.1, 0.5, 0.5, 0.5)),
    Scenario("2.C.3", (0.1, 0.1, 0.1, 0.1, 0.1, 0.5)),
    Scenario("2.D.1", (0.1, 0.7, 0.7, 0.7, 0.7, 0.7)),
    Scenario("2.D.2", (0.1, 0.1, 0.1, 0.7, 0.7, 0.7)),
    Scenario("2.D.3", (0.1, 0.1, 0.1, 0.1, 0.1, 0.7)),
    Scenario("3.A.1", (0.1, 0.4, 0.7, 0.7, 0.7, 0.7)),
    Scenario("3.A.2", (0.1, 0.1, 0.4, 0.4, 0.7, 0.7)),
    Scenario("3.A.3", (0.1, 0.1, 0.1, 0.1, 0.4, 0.7)),
    Scenario("3.B.1", (0.1, 0.4, 0.9, 0.9, 0.9, 0.9)),
    Scenario("3.B.2", (0.1, 0.1, 0.4, 0.4, 0.9, 0.9)),
    Scenario("3.B.3", (0.1, 0.1, 0.1, 0.1, 0.4, 0.9)),
)
# fmt: on

_SCENARIO_INDEX = {scenario.id: index for index, scenario in enumerate(SCENARIOS)}


def scenario_table() -> tuple[Scenario, ...]:
    """All 25 scenarios in table order"""
    return SCENARIOS


def scenario_ids() -> tuple[str, ...]:
    """Scenario ids in table order"""
    return tuple(scenario.id for scenario in SCENARIOS)


def find_scenario(scenario_id: str) -> Scenario:
    """Looks up one scenario by id"""
    try:
        return SCENARIOS[_SCENARIO_INDEX[scenario_id.strip()]]
    except KeyError as error:
        raise DataValidationError(f"unknown scenario id '{scenario_id}'") from error


def select_scenarios(selectors) -> tuple[str, ...]:
    """
    Resolves ids and family prefixes ("2.B" selects 2.B.1 to 2.B.3) to
    scenario ids in table order, without duplicates
    """
    chosen = set()
    for selector in selectors:
        selector = selector.strip()
        matches = [sid for sid in _SCENARIO_INDEX if sid == selector or sid.startswith(selector + ".")]
        if not selector or not matches:
            raise DataValidationError(f"unknown scenario id '{selector}'")
        chosen.update(matches)
    return tuple(sid for sid in scenario_ids() if sid in chosen)


######################################################################
#  P L A N   A N D   T R I A L S
######################################################################
@dataclass(frozen=True)
class SimPlan:
    """
    One simulation grid

    Without explicit ``method_configs`` the defaults are re-centered on
    ``prior_mean``. Explicit configs are taken as already resolved, so a
    run configuration can apply its section overrides after re-centering.
    """

    scenario_ids: tuple[str, ...] = field(default_factory=scenario_ids)
    sample_sizes: tuple[int, ...] = DEFAULT_SAMPLE_SIZES
    methods: tuple[MethodId, ...] = tuple(MethodId)
    n_reps: int = config.DEFAULT_REPS
    master_seed: int = config.DEFAULT_SEED
    prior_mean: float = 0.5
    mcmc: McmcConfig = McmcConfig()
    method_configs: Optional[MethodConfigs] = None
    workers: int = config.DEFAULT_WORKERS

    def __post_init__(self):
        object.__setattr__(self, "scenario_ids", tuple(self.scenario_ids))
        object.__setattr__(self, "sample_sizes", tuple(self.sample_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.method_configs is None:
            object.__setattr__(self, "method_configs", apply_prior_mean(MethodConfigs(), self.prior_mean))
        for scenario_id in self.scenario_ids:
            find_scenario(scenario_id)
        if not self.scenario_ids or not self.methods or not self.sample_sizes:
            raise DataValidationError("plan needs at least one scenario, method and sample size")
        if any(n < 1 for n in self.sample_sizes):
            raise DataValidationError("sample sizes must be positive")
        if self.n_reps < 1:
            raise DataValidationError(f"n_reps must be >= 1, got {self.n_reps}")
        if self.workers < 1:
            raise DataValidationError(f"workers must be >= 1, got {self.workers}")
        if self.master_seed < 0:
            raise DataValidationError("master_seed must be nonnegative")


def generate_trial(scenario: Scenario, n_per_cohort: int, rng: RngStream) -> TrialData:
    """One trial with r_i ~ Binomial(n_per_cohort, p_i) per cohort"""
    if n_per_cohort < 1:
        raise DataValidationError(f"n_per_cohort must be >= 1, got {n_per_cohort}")
    generator = rng.generator
    return TrialData(
        tuple(CohortData(n_per_cohort, Binomial(n_per_cohort, p).sample(generator)) for p in scenario.true_rates)
    )


######################################################################
#  R E S U L T S   A N D   M E T R I C S
######################################################################
@dataclass(frozen=True)
class ReplicationResult:
    """Estimates of one method in one (scenario, n) cell, one row per successful replication"""

    scenario_id: str
    method: MethodId
    n_per_cohort: int
    estimates: np.ndarray
    replications: tuple[int, ...]
    failures: tuple[int, ...] = ()
    digests: tuple[str, ...] = ()

    @property
    def n_reps(self) -> int:
        """Number of successful replications"""
        return len(self.replications)


@dataclass(frozen=True)
class MetricsRecord:
    """Aggregate metrics of one (scenario, method, n) cell"""

    scenario_id: str
    method: MethodId
    n_per_cohort: int
    mean_abs_bias: float
    mean_mse: float
    shrinkage: Optional[float]
    mean_est_se: float
    true_mean: float
    est_mean: float
    n_reps: int


@dataclass(frozen=True)
class CohortMetrics:
    """Metrics of one cohort within a (scenario, method, n) cell"""

    scenario_id: str
    method: MethodId
    n_per_cohort: int
    cohort: int
    true_p: float
    mean_est: float
    bias: float
    variance: float
    mse: float


def _moments(results: ReplicationResult, scenario: Scenario):
    estimates = np.asarray(results.estimates, dtype=float)
    if estimates.ndim != 2 or estimates.shape[0] < 2:
        raise DataValidationError("metrics need at least 2 replications")
    if estimates.shape[1] != scenario.k:
        raise DataValidationError(f"estimates have {estimates.shape[1]} cohorts, scenario {scenario.id} has {scenario.k}")
    truth = np.asarray(scenario.true_rates)
    mean_est = estimates.mean(axis=0)
    variance = estimates.var(axis=0, ddof=1)
    return truth, mean_est, variance, estimates.shape[0]


def compute_metrics(results: ReplicationResult, scenario: Scenario) -> MetricsRecord:
    """Mean absolute bias, mean MSE and shrinkage over the replications"""
    truth, mean_est, variance, reps = _moments(results, scenario)
    bias = mean_est - truth
    true_range = float(truth.max() - truth.min())
    shrinkage = None
    if true_range > 0:
        shrinkage = 1.0 - float(mean_est.max() - mean_est.min()) / true_range
    return MetricsRecord(
        scenario_id=scenario.id,
        method=results.method,
        n_per_cohort=results.n_per_cohort,
        mean_abs_bias=float(np.mean(np.abs(bias))),
        mean_mse=float(np.mean(bias**2 + variance)),
        shrinkage=shrinkage,
        mean_est_se=float(np.mean(np.sqrt(variance / reps))),
        true_mean=float(truth.mean()),
        est_mean=float(mean_est.mean()),
        n_reps=reps,
    )


def compute_cohort_metrics(results: ReplicationResult, scenario: Scenario) -> list[CohortMetrics]:
    """Per-cohort truth, mean estimate, bias, variance and MSE (cohorts numbered from 1)"""
    truth, mean_est, variance, _ = _moments(results, scenario)
    rows = []
    for index, (p, est, var) in enumerate(zip(truth, mean_est, variance)):
        bias = float(est - p)
        rows.append(
            CohortMetrics(
                scenario_id=scenario.id,
                method=results.method,
                n_per_cohort=results.n_per_cohort,
                cohort=index + 1,
                true_p=float(p),
                mean_est=float(est),
                bias=bias,
                variance=float(var),
                mse=bias**2 + float(var),
            )
        )
    return rows


######################################################################
#  R E P L I C A T I O N S
######################################################################
def _run_replications(task):
    """Runs every method on replications [start, stop) of one cell; picklable for the worker pool"""
    plan, scenario_index, n_per_cohort, start, stop = task
    scenario = SCENARIOS[scenario_index]
    master = RngStream(plan.master_seed)
    rows = []
    for rep in range(start, stop):
        trial_rng = master.child(scenario_index, n_per_cohort, rep)
        trial = generate_trial(scenario, n_per_cohort, trial_rng)
        outcome = {}
        for method in plan.methods:
            rng = trial_rng.child(METHOD_INDEX[method])
            try:
                outcome[method] = estimate(method, trial, plan.method_configs, plan.mcmc, rng).estimates
            except (BasketSimError, ArithmeticError, np.linalg.LinAlgError) as error:
                outcome[method] = f"{type(error).__name__}: {error}"
        rows.append((rep, trial.digest(), outcome))
    return rows


def _chunks(n_reps: int, workers: int):
    size = max(1, math.ceil(n_reps / (workers * CHUNKS_PER_WORKER)))
    return [(start, min(start + size, n_reps)) for start in range(0, n_reps, size)]


def _collect(plan: SimPlan, scenario: Scenario, n_per_cohort: int, rows) -> list[ReplicationResult]:
    """Splits the ordered replication rows into one result per method and enforces the failure budget"""
    digests = tuple(digest for _, digest, _ in rows)
    results = []
    for method in plan.methods:
        kept, estimates, failures = [], [], []
        for rep, _, outcome in rows:
            value = outcome[method]
            if isinstance(value, str):
                logger.warning(
                    "Estimator failed: scenario=%s n=%d rep=%d method=%s: %s",
                    scenario.id,
                    n_per_cohort,
                    rep,
                    method.value,
                    value,
                )
                failures.append(rep)
            else:
                kept.append(rep)
                estimates.append(value)
        if failures:
            logger.warning("%d of %d replications excluded for %s", len(failures), plan.n_reps, method.value)
        if len(failures) > MAX_FAILURE_RATE * plan.n_reps:
            raise SimulationAbortedError(
                f"{len(failures)} of {plan.n_reps} replications failed for {method.value} "
                f"in scenario {scenario.id}, n={n_per_cohort}"
            )
        results.append(
            ReplicationResult(
                scenario_id=scenario.id,
                method=method,
                n_per_cohort=n_per_cohort,
                estimates=np.asarray(estimates, dtype=float).reshape(len(kept), scenario.k),
                replications=tuple(kept),
                failures=tuple(failures),
                digests=digests,
            )
        )
    return results


@dataclass
class SimulationOutcome:
    """Everything one plan produced, in (scenario, n, method) plan order"""

    results: list[ReplicationResult] = field(default_factory=list)
    records: list[MetricsRecord] = field(default_factory=list)
    cohort_rows: list[CohortMetrics] = field(default_factory=list)


def run_plan(plan: SimPlan) -> SimulationOutcome:
    """
    Runs every (scenario, n, replication) of the plan, all methods on the
    same generated trial, and aggregates the metrics

    Replications are spread over ``plan.workers`` processes in chunks and
    merged back in replication order, so the outcome does not depend on
    the worker count.
    """
    outcome = SimulationOutcome()
    executor = ProcessPoolExecutor(max_workers=plan.workers) if plan.workers > 1 else None
    try:
        for scenario_id in plan.scenario_ids:
            scenario = find_scenario(scenario_id)
            scenario_index = _SCENARIO_INDEX[scenario.id]
            for n_per_cohort in plan.sample_sizes:
                tasks = [(plan, scenario_index, n_per_cohort, start, stop) for start, stop in _chunks(plan.n_reps, plan.workers)]
                chunks = executor.map(_run_replications, tasks) if executor else map(_run_replications, tasks)
                rows = [row for chunk in chunks for row in chunk]
                for results in _collect(plan, scenario, n_per_cohort, rows):
                    outcome.results.append(results)
                    outcome.records.append(compute_metrics(results, scenario))
                    outcome.cohort_rows.extend(compute_cohort_metrics(results, scenario))
                logger.info(
                    "Finished scenario %s n=%d: %d replications x %d methods",
                    scenario.id,
                    n_per_cohort,
                    plan.n_reps,
                    len(plan.methods),
                )
    finally:
        if executor:
            executor.shutdown(cancel_futures=True)
    return outcome
