"""
Models for basket trials

Domain types shared by the estimators, the simulation harness and the
estimation service. All of them are immutable value objects.
"""

import hashlib
import logging
import numbers
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger("basketsim")

# slack on [0,1] before an estimate counts as out of range
ROUND_OFF = 1e-12


######################################################################
#  E X C E P T I O N S
######################################################################
class BasketSimError(Exception):
    """Root of every error raised by basketsim"""


class DataValidationError(BasketSimError, ValueError):
    """Used for invalid data, invalid parameters and domain errors"""


class ConfigurationError(DataValidationError):
    """Used for errors in a run configuration, reported with a key path"""

    def __init__(self, key_path: str, message: str):
        super().__init__(f"{key_path}: {message}")
        self.key_path = key_path


class EstimationError(BasketSimError):
    """Used when an estimator fails numerically"""


class SimulationAbortedError(BasketSimError):
    """Used when too many replications fail for a method"""


class OutputError(BasketSimError):
    """Used when result files cannot be written"""


######################################################################
#  M E T H O D S
######################################################################
class MethodId(Enum):
    """Enumeration of the response-rate estimators"""

    SAMPLE_PROPORTION = "sample_proportion"
    BERRY_BHM = "berry_bhm"
    EXNEX = "exnex"
    PSIODA_BMA = "psioda_bma"
    FUJIKAWA = "fujikawa"
    JIN_CBHM = "jin_cbhm"
    CHEN_LEE_BCHM = "chen_lee_bchm"
    LIU_LOCAL_MEM = "liu_local_mem"

    @property
    def exact(self) -> bool:
        """True for the estimators that do not use Monte Carlo"""
        return self in EXACT_METHODS

    @classmethod
    def parse(cls, name: str) -> "MethodId":
        """Looks up a method by its serialized name (case-insensitive)"""
        try:
            return cls(name.strip().lower())
        except ValueError as error:
            raise DataValidationError(f"unknown method '{name}'") from error


EXACT_METHODS = frozenset(
    {
        MethodId.SAMPLE_PROPORTION,
        MethodId.PSIODA_BMA,
        MethodId.FUJIKAWA,
        MethodId.LIU_LOCAL_MEM,
    }
)


######################################################################
#  T R I A L   D A T A
######################################################################
@dataclass(frozen=True)
class CohortData:
    """Patient count n and responder count r of one cohort"""

    n: int
    r: int

    def __post_init__(self):
        for name in ("n", "r"):
            value = getattr(self, name)
            if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
                raise DataValidationError(f"{name} must be an integer, got {value!r}")
            value = int(value)
            object.__setattr__(self, name, value)
            if value < 0:
                raise DataValidationError(f"negative count: {name}={value}")
        if self.r > self.n:
            raise DataValidationError(f"r exceeds n ({self.r} > {self.n})")

    @property
    def proportion(self) -> float:
        """Observed response proportion r/n"""
        return self.r / self.n

    def serialize(self) -> dict:
        """Serializes a CohortData into a dictionary"""
        return {"n": self.n, "r": self.r}

    @classmethod
    def deserialize(cls, data) -> "CohortData":
        """Deserializes a CohortData from a dictionary"""
        try:
            return cls(n=data["n"], r=data["r"])
        except KeyError as error:
            raise DataValidationError(f"Invalid cohort: missing {error.args[0]}") from error
        except TypeError as error:
            raise DataValidationError(f"Invalid cohort: bad or no data {error}") from error


@dataclass(frozen=True)
class TrialData:
    """Ordered per-cohort counts of one real or simulated basket trial"""

    cohorts: tuple[CohortData, ...]

    def __post_init__(self):
        object.__setattr__(self, "cohorts", tuple(self.cohorts))

    @classmethod
    def from_counts(cls, n, r) -> "TrialData":
        """Builds a trial from parallel sequences of n and r"""
        n = [int(value) for value in n]
        r = [int(value) for value in r]
        if len(n) != len(r):
            raise DataValidationError(f"n and r differ in length ({len(n)} != {len(r)})")
        return cls(tuple(CohortData(n_i, r_i) for n_i, r_i in zip(n, r)))

    @property
    def k(self) -> int:
        """Number of cohorts"""
        return len(self.cohorts)

    @property
    def n(self) -> tuple[int, ...]:
        """Patient counts in cohort order"""
        return tuple(cohort.n for cohort in self.cohorts)

    @property
    def r(self) -> tuple[int, ...]:
        """Responder counts in cohort order"""
        return tuple(cohort.r for cohort in self.cohorts)

    def permuted(self, order) -> "TrialData":
        """Returns the trial with cohorts taken in the given order"""
        return TrialData(tuple(self.cohorts[i] for i in order))

    def digest(self) -> str:
        """Stable hash of the counts, used to check paired replications"""
        text = ";".join(f"{c.n},{c.r}" for c in self.cohorts)
        return hashlib.sha1(text.encode("utf-8")).hexdigest()

    def serialize(self) -> dict:
        """Serializes a TrialData into a dictionary"""
        return {"cohorts": [cohort.serialize() for cohort in self.cohorts]}

    @classmethod
    def deserialize(cls, data) -> "TrialData":
        """
        Deserializes a TrialData from a dictionary

        Args:
            data (dict): a dictionary with a "cohorts" list of {"n", "r"}
        """
        try:
            cohorts = tuple(CohortData.deserialize(item) for item in data["cohorts"])
        except KeyError as error:
            raise DataValidationError(f"Invalid trial: missing {error.args[0]}") from error
        except TypeError as error:
            raise DataValidationError(f"Invalid trial: bad or no data {error}") from error
        return validate_trial(cls(cohorts))


def validate_trial(data: TrialData) -> TrialData:
    """Returns the trial unchanged if every invariant holds

    :param data: the trial to check
    :type data: TrialData

    :return: the same trial
    :rtype: TrialData

    """
    if not isinstance(data, TrialData):
        raise DataValidationError(f"expected TrialData, got {type(data).__name__}")
    # CohortData checks r <= n and nonnegativity on construction; re-check
    # here so hand-built objects are reported in the same way
    for cohort in data.cohorts:
        if cohort.n < 0 or cohort.r < 0:
            raise DataValidationError("negative count")
        if cohort.r > cohort.n:
            raise DataValidationError("r exceeds n")
    if data.k < 2:
        raise DataValidationError(f"K < 2 (got {data.k} cohort)")
    return data


######################################################################
#  S C E N A R I O S   A N D   E S T I M A T E S
######################################################################
@dataclass(frozen=True)
class Scenario:
    """A labelled vector of true response rates"""

    id: str  # pylint: disable=invalid-name
    true_rates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "true_rates", tuple(float(p) for p in self.true_rates))
        if any(not 0.0 <= p <= 1.0 for p in self.true_rates):
            raise DataValidationError(f"scenario {self.id}: rates must lie in [0,1]")

    @property
    def k(self) -> int:
        """Number of cohorts"""
        return len(self.true_rates)

    @property
    def homogeneous(self) -> bool:
        """True when every cohort shares one response rate"""
        return max(self.true_rates) == min(self.true_rates)

    def serialize(self) -> dict:
        """Serializes a Scenario into a dictionary"""
        return {
            "id": self.id,
            "true_rates": list(self.true_rates),
            "homogeneous": self.homogeneous,
        }


@dataclass(frozen=True)
class EstimateVector:
    """Per-cohort response-rate estimates, in cohort order"""

    estimates: tuple[float, ...]

    def __post_init__(self):
        values = []
        for value in self.estimates:
            value = float(value)
            if not -ROUND_OFF <= value <= 1.0 + ROUND_OFF:
                raise EstimationError(f"estimate {value!r} outside [0,1]")
            values.append(min(max(value, 0.0), 1.0))
        object.__setattr__(self, "estimates", tuple(values))

    def __len__(self):
        return len(self.estimates)

    def __getitem__(self, index):
        return self.estimates[index]

    def serialize(self) -> list:
        """Serializes an EstimateVector into a list"""
        return list(self.estimates)
