"""
Experiment data models for the ProjectCarleson system.
"""
import math
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, validator


class ExperimentConfig(BaseModel):
    """
    Every tunable of a verification or sharpness run.

    Loaded from a JSON file with parse_file() and then overridden key by key
    from command-line flags; replaying the same config reproduces every artifact.
    """
    n: int = 3
    alpha: float = 0.0
    p: float = 2.0
    eta: float = 0.5
    depth: int = 6
    systems: int = 3
    pool: int = 2_000_000
    seed: int = 7
    deltas: List[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    weight_deltas: List[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05, 0.025])
    gamma: float = 0.4
    r0: float = 1.0

    # geometry and measure suites
    metric_samples: int = 100_000
    metric_dimensions: List[int] = Field(default_factory=lambda: [3, 4, 5])
    band_samples: int = 1_000
    doubling_grid: int = 400

    # dyadic construction
    probe_points: int = 100_000
    cover_caps: int = 1_000
    max_systems: int = 8

    # weights
    radii_count: int = 64
    oracle_radii: int = 10_000
    min_occupancy: int = 30

    # operators
    domination_pairs: int = 10_000
    maximal_trials: int = 20
    rdf_p: float = 4.0
    rdf_trials: int = 20
    rdf_depth: int = 12
    rdf_pool: int = 20_000
    power_tol: float = 1e-8
    power_max_iter: int = 1_000
    dense_limit: int = 2_000
    operator_depth: int = 2

    # sharpness
    slope_band: float = 0.2
    shards: int = 8
    out: str = "output"

    @validator("n")
    def dimension(cls, value):
        if value < 3:
            raise ValueError(f"n must be at least 3, got {value}")
        return value

    @validator("alpha")
    def alpha_range(cls, value):
        if not value > -1.0:
            raise ValueError(f"alpha must exceed -1, got {value}")
        return value

    @validator("p", "rdf_p")
    def exponent_range(cls, value):
        if not (1.0 < value < math.inf):
            raise ValueError(f"p must lie in (1, inf), got {value}")
        return value

    @validator("eta")
    def eta_range(cls, value):
        if not (0.0 < value <= 0.5):
            raise ValueError(f"eta must lie in (0, 1/2], got {value}")
        return value

    @validator("depth", "systems", "operator_depth", "shards")
    def at_least_one(cls, value):
        if value < 1:
            raise ValueError("depth, systems and shards must be at least 1")
        return value

    @validator("deltas", "weight_deltas", each_item=True)
    def delta_range(cls, value):
        if not (0.0 < value < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {value}")
        return value

    @validator("gamma")
    def gamma_range(cls, value):
        if not (0.0 < value < 0.5):
            raise ValueError(f"gamma must lie in (0, 1/2), got {value}")
        return value

    @validator("pool", "probe_points", "metric_samples", "rdf_pool")
    def positive_count(cls, value):
        if value < 1:
            raise ValueError("sample counts must be positive")
        return value

    def to_dict(self) -> Dict:
        return self.dict()


class SharpnessRow(BaseModel):
    """One delta of the sharpness experiment."""
    delta: float
    s: float
    bb_constant: float
    f_norm: float
    f_norm_quadrature: float
    T_norm_lb: float
    T_norm: float
    witness_ratio_sq: float
    ratio: float

    @validator("bb_constant", "f_norm", "T_norm")
    def positive(cls, value):
        if not value > 0:
            raise ValueError("sharpness quantities must be positive")
        return value

    def row(self) -> Dict[str, float]:
        return self.dict()


class CheckResult(BaseModel):
    """A single named check inside a suite."""
    name: str
    passed: bool
    value: Optional[float] = None
    bound: Optional[float] = None
    flagged: bool = False  # outside an advisory band; does not fail the run
    detail: Dict[str, Any] = Field(default_factory=dict)

    def to_dict(self) -> Dict:
        return self.dict()


class SuiteStatus(str, Enum):
    """Outcome of a verification suite."""
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


class SuiteReport(BaseModel):
    """Checks and artifacts produced by one verification suite."""
    suite: str
    claim: str  # the inequality the suite verifies
    status: SuiteStatus = SuiteStatus.PASSED
    checks: List[CheckResult] = Field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    error: Optional[str] = None
    started_at: datetime = Field(default_factory=datetime.now)
    finished_at: Optional[datetime] = None

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        if not check.passed:
            self.status = SuiteStatus.FAILED
        return check

    def check(self, name: str, passed: bool, value: Optional[float] = None,
              bound: Optional[float] = None, flagged: bool = False, **detail) -> CheckResult:
        return self.add(CheckResult(name=name, passed=bool(passed),
                                    value=None if value is None else float(value),
                                    bound=None if bound is None else float(bound),
                                    flagged=flagged, detail=detail))

    @property
    def passed(self) -> bool:
        return self.status == SuiteStatus.PASSED

    def finish(self) -> "SuiteReport":
        self.finished_at = datetime.now()
        return self

    def to_dict(self) -> Dict:
        data = self.dict(exclude={"tables"})
        data["started_at"] = self.started_at.isoformat()
        data["finished_at"] = self.finished_at.isoformat() if self.finished_at else None
        data["tables"] = sorted(self.tables)
        return data
