"""
Run configuration and result files

A run configuration is an INI-style document. Keys that appear before any
section header belong to ``[simulation]``::

    prior_mean: 0.3
    scenarios = 1.A, 2.B.2
    methods = sample_proportion, berry_bhm

    [mcmc]
    n_keep = 4000

    [fujikawa]
    tau = 0.3

Resolution order: defaults, then ``prior_mean`` re-centering, then the
per-method sections. ``RunConfig.to_ini`` writes the fully resolved values
back out; parsing that echo resolves to the same values.
"""

import configparser
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import pandas as pd

from basketsim import __version__, config
from basketsim.estimators import MethodConfigs, apply_prior_mean
from basketsim.harness import DEFAULT_SAMPLE_SIZES, CohortMetrics, MetricsRecord, SimPlan, scenario_ids, select_scenarios
from basketsim.mcmc import McmcConfig
from basketsim.models import ConfigurationError, DataValidationError, MethodId, OutputError

logger = logging.getLogger("basketsim")

SIMULATION = "simulation"
MCMC = "mcmc"
SIMULATION_KEYS = ("scenarios", "sample_sizes", "methods", "reps", "seed", "prior_mean", "workers", "output_dir")
MCMC_KEYS = ("n_burn", "n_keep", "thin", "adapt_window", "target_accept")

SUMMARY_FILE = "summary.csv"
PER_COHORT_FILE = "per_cohort.csv"
TOTAL_MEAN_FILE = "total_mean.csv"
MANIFEST_FILE = "manifest"
RESOLVED_CONFIG_FILE = "resolved_config.ini"

SUMMARY_COLUMNS = ["scenario", "method", "n", "mean_abs_bias", "mean_mse", "shrinkage"]
PER_COHORT_COLUMNS = ["scenario", "method", "n", "cohort", "true_p", "mean_est", "bias", "variance", "mse"]
TOTAL_MEAN_COLUMNS = ["scenario", "method", "n", "true_mean", "est_mean"]


######################################################################
#  V A L U E   C O N V E R S I O N
######################################################################
def _split(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _convert(key_path: str, raw: str, kind: type):
    try:
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError as error:
        raise ConfigurationError(key_path, f"expected {kind.__name__}, got '{raw}'") from error


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(item) for item in value)
    if isinstance(value, MethodId):
        return value.value
    return str(value)


def _field_kinds(cls) -> dict[str, type]:
    """int or float per dataclass field, taken from the default value"""
    return {f.name: int if isinstance(f.default, int) and not isinstance(f.default, bool) else float for f in fields(cls)}


def _replace_checked(section: str, base, overrides: dict):
    """replace() that reports the offending key when a value breaks an invariant"""
    try:
        return replace(base, **overrides)
    except DataValidationError as error:
        for key, value in overrides.items():
            try:
                replace(base, **{key: value})
            except DataValidationError as single:
                raise ConfigurationError(f"{section}.{key}", str(single)) from single
        raise ConfigurationError(section, str(error)) from error


def resolve_method_configs(prior_mean: float, overrides: dict) -> MethodConfigs:
    """Defaults, re-centered on prior_mean, then the per-section overrides"""
    try:
        configs = apply_prior_mean(MethodConfigs(), prior_mean)
    except DataValidationError as error:
        raise ConfigurationError(f"{SIMULATION}.prior_mean", str(error)) from error
    sections = {}
    for section, values in overrides.items():
        sections[section] = _replace_checked(section, getattr(configs, section), dict(values))
    return replace(configs, **sections)


######################################################################
#  R U N   C O N F I G
######################################################################
@dataclass(frozen=True)
class RunConfig:
    """A fully validated simulation run: the plan settings plus per-method overrides"""

    scenarios: tuple[str, ...] = field(default_factory=scenario_ids)
    sample_sizes: tuple[int, ...] = DEFAULT_SAMPLE_SIZES
    methods: tuple[MethodId, ...] = tuple(MethodId)
    reps: int = config.DEFAULT_REPS
    seed: int = config.DEFAULT_SEED
    prior_mean: float = 0.5
    workers: int = config.DEFAULT_WORKERS
    output_dir: str = config.DEFAULT_OUTPUT_DIR
    mcmc: McmcConfig = McmcConfig()
    method_overrides: dict = field(default_factory=dict)
    method_configs: MethodConfigs = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "method_configs", resolve_method_configs(self.prior_mean, self.method_overrides))
        self.plan()

    def plan(self) -> SimPlan:
        """The SimPlan this configuration describes"""
        try:
            return SimPlan(
                scenario_ids=self.scenarios,
                sample_sizes=self.sample_sizes,
                methods=self.methods,
                n_reps=self.reps,
                master_seed=self.seed,
                prior_mean=self.prior_mean,
                mcmc=self.mcmc,
                method_configs=self.method_configs,
                workers=self.workers,
            )
        except ConfigurationError:
            raise
        except DataValidationError as error:
            raise ConfigurationError(SIMULATION, str(error)) from error

    def resolved(self) -> dict:
        """
        The resolved configuration as a mapping of sections

        Execution settings (workers, output_dir) are left out: they never
        change the numbers a run produces.
        """
        document = {
            SIMULATION: {
                "scenarios": list(self.scenarios),
                "sample_sizes": list(self.sample_sizes),
                "methods": [method.value for method in self.methods],
                "reps": self.reps,
                "seed": self.seed,
                "prior_mean": self.prior_mean,
            },
            MCMC: {key: getattr(self.mcmc, key) for key in MCMC_KEYS},
        }
        for section in MethodConfigs.sections():
            document[section] = asdict(getattr(self.method_configs, section))
        return document

    def to_ini(self) -> str:
        """Resolved configuration as a document parse_config accepts"""
        lines = []
        for section, values in self.resolved().items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {_format(value)}" for key, value in values.items())
            lines.append("")
        return "\n".join(lines)


def _parse_simulation(values: dict) -> dict:
    settings = {}
    for key, raw in values.items():
        key_path = f"{SIMULATION}.{key}"
        if key not in SIMULATION_KEYS:
            raise ConfigurationError(key_path, "unknown key")
        try:
            if key == "scenarios":
                items = _split(raw)
                settings[key] = scenario_ids() if items == ["all"] else select_scenarios(items)
            elif key == "methods":
                items = _split(raw)
                settings[key] = tuple(MethodId) if items == ["all"] else tuple(MethodId.parse(item) for item in items)
            elif key == "sample_sizes":
                settings[key] = tuple(_convert(key_path, item, int) for item in _split(raw))
            elif key == "prior_mean":
                settings[key] = _convert(key_path, raw, float)
            elif key == "output_dir":
                settings[key] = raw
            else:
                settings[key] = _convert(key_path, raw, int)
        except ConfigurationError:
            raise
        except DataValidationError as error:
            raise ConfigurationError(key_path, str(error)) from error
    return settings


def _parse_section(section: str, values: dict, kinds: dict) -> dict:
    overrides = {}
    for key, raw in values.items():
        key_path = f"{section}.{key}"
        if key not in kinds:
            raise ConfigurationError(key_path, "unknown key")
        overrides[key] = _convert(key_path, raw, kinds[key])
    return overrides


def parse_config(text: Optional[str]) -> RunConfig:
    """
    Parses and validates a run configuration document

    Raises:
        ConfigurationError: for unknown sections or keys, values of the
            wrong type and values that break an invariant, with the key path
    """
    text = text or ""
    # keys before the first header belong to [simulation]; a later explicit
    # [simulation] header, or any repeated section, is merged into the first
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=", ":"), inline_comment_prefixes=("#", ";"), strict=False
    )
    try:
        parser.read_string(f"[{SIMULATION}]\n{text}")
    except configparser.Error as error:
        raise ConfigurationError("document", error.message) from error

    defaults = MethodConfigs()
    mcmc_kinds = {key: kind for key, kind in _field_kinds(McmcConfig).items() if key in MCMC_KEYS}
    settings = {}
    mcmc_overrides = {}
    method_overrides = {}
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == SIMULATION:
            settings.update(_parse_simulation(values))
        elif section == MCMC:
            mcmc_overrides = _parse_section(MCMC, values, mcmc_kinds)
        elif section in MethodConfigs.sections():
            kinds = _field_kinds(type(getattr(defaults, section)))
            method_overrides[section] = _parse_section(section, values, kinds)
        else:
            raise ConfigurationError(section, "unknown section")

    mcmc = _replace_checked(MCMC, McmcConfig(), mcmc_overrides)
    run_config = RunConfig(mcmc=mcmc, method_overrides=method_overrides, **settings)
    logger.debug("Resolved configuration:\n%s", run_config.to_ini())
    return run_config


def read_config(path: str) -> RunConfig:
    """Parses the configuration document stored at path"""
    try:
        with open(path, encoding="utf-8") as handle:
            return parse_config(handle.read())
    except OSError as error:
        raise ConfigurationError("document", f"cannot read {path}: {error.strerror}") from error


######################################################################
#  R E S U L T   F I L E S
######################################################################
def summary_frame(records: list[MetricsRecord]) -> pd.DataFrame:
    """One row per (scenario, method, n), sorted"""
    frame = pd.DataFrame(
        [
            {
                "scenario": record.scenario_id,
                "method": record.method.value,
                "n": record.n_per_cohort,
                "mean_abs_bias": record.mean_abs_bias,
                "mean_mse": record.mean_mse,
                "shrinkage": record.shrinkage,
                "true_mean": record.true_mean,
                "est_mean": record.est_mean,
            }
            for record in records
        ]
    )
    return frame.sort_values(["scenario", "method", "n"], kind="mergesort").reset_index(drop=True)


def per_cohort_frame(rows: list[CohortMetrics]) -> pd.DataFrame:
    """One row per (scenario, method, n, cohort), sorted"""
    frame = pd.DataFrame(
        [
            {
                "scenario": row.scenario_id,
                "method": row.method.value,
                "n": row.n_per_cohort,
                "cohort": row.cohort,
                "true_p": row.true_p,
                "mean_est": row.mean_est,
                "bias": row.bias,
                "variance": row.variance,
                "mse": row.mse,
            }
            for row in rows
        ],
        columns=PER_COHORT_COLUMNS,
    )
    return frame.sort_values(["scenario", "method", "n", "cohort"], kind="mergesort").reset_index(drop=True)


def _manifest(records: list[MetricsRecord], run_config: Optional[RunConfig]) -> dict:
    manifest = {"software": "basketsim", "version": __version__}
    if run_config is not None:
        manifest["seed"] = run_config.seed
        manifest["config"] = run_config.resolved()
    manifest["monte_carlo_se"] = [
        {
            "scenario": record.scenario_id,
            "method": record.method.value,
            "n": record.n_per_cohort,
            "mean_est_se": record.mean_est_se,
            "reps": record.n_reps,
        }
        for record in sorted(records, key=lambda r: (r.scenario_id, r.method.value, r.n_per_cohort))
    ]
    return manifest


def _write_csv(frame: pd.DataFrame, path: str, columns: list[str]):
    frame.to_csv(path, columns=columns, index=False, encoding="utf-8", lineterminator="\n", na_rep="")


def emit_results(
    records: list[MetricsRecord],
    per_cohort: list[CohortMetrics],
    directory: str,
    run_config: Optional[RunConfig] = None,
) -> list[str]:
    """
    Writes summary.csv, per_cohort.csv, total_mean.csv and the JSON manifest
    (plus resolved_config.ini when run_config is given) into directory

    Returns:
        the paths written, in that order
    """
    if not records:
        raise DataValidationError("no results to write")
    try:
        os.makedirs(directory, exist_ok=True)
        summary = summary_frame(records)
        paths = [os.path.join(directory, name) for name in (SUMMARY_FILE, PER_COHORT_FILE, TOTAL_MEAN_FILE, MANIFEST_FILE)]
        _write_csv(summary, paths[0], SUMMARY_COLUMNS)
        _write_csv(per_cohort_frame(per_cohort), paths[1], PER_COHORT_COLUMNS)
        _write_csv(summary, paths[2], TOTAL_MEAN_COLUMNS)
        with open(paths[3], "w", encoding="utf-8", newline="\n") as handle:
            json.dump(_manifest(records, run_config), handle, indent=2, sort_keys=True)
            handle.write("\n")
        if run_config is not None:
            paths.append(os.path.join(directory, RESOLVED_CONFIG_FILE))
            with open(paths[-1], "w", encoding="utf-8", newline="\n") as handle:
                handle.write(run_config.to_ini())
    except OSError as error:
        raise OutputError(f"cannot write results to {directory}: {error.strerror or error}") from error
    logger.info("Wrote %d summary rows to %s", len(summary), directory)
    return paths
