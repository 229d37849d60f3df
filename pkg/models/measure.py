"""
Measure data models for the ProjectCarleson system.
"""
from enum import Enum
from typing import Dict, List

from pydantic import BaseModel, validator


class MeasureMethod(str, Enum):
    """How a measure estimate was produced."""
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"


class MeasureValue(BaseModel):
    """A measure estimate with its error bar."""
    value: float
    abs_error: float = 0.0
    method: MeasureMethod = MeasureMethod.QUADRATURE
    samples: int = 0  # Monte Carlo only

    @validator("value")
    def nonnegative_value(cls, value):
        if value < 0:
            raise ValueError(f"measure values are nonnegative, got {value}")
        return value

    @validator("abs_error")
    def nonnegative_error(cls, value):
        if value < 0:
            raise ValueError("abs_error must be nonnegative")
        return value

    @property
    def relative_error(self) -> float:
        return self.abs_error / self.value if self.value > 0 else float("inf")

    def to_dict(self) -> Dict:
        return self.dict()


class AlphaContext(BaseModel):
    """Dimension n, exponent alpha and the normalizing constant c_alpha of nu_alpha."""
    n: int
    alpha: float
    c_alpha: float

    class Config:
        allow_mutation = False

    @validator("n")
    def dimension(cls, value):
        if value < 3:
            raise ValueError(f"n must be at least 3, got {value}")
        return value

    @validator("c_alpha")
    def positive_constant(cls, value):
        if value <= 0:
            raise ValueError("c_alpha must be positive")
        return value

    def to_dict(self) -> Dict:
        return self.dict()


class AreaBounds(BaseModel):
    """Two-sided constants for |B_rho(x,r)^|_alpha against (c_alpha/(alpha+1)) r^(n+alpha) (2-r)^(alpha+1)."""
    n: int
    alpha: float
    c1: float  # inf over r of sigma(cap r) / r^(n-1)
    c2: float  # sup over r of sigma(cap r) / r^(n-1)
    C1: float
    C2: float
    C1_stated: float  # n c1 / 2^(n-2) * (3/4)^(alpha+1)

    def to_dict(self) -> Dict:
        return self.dict()


class DoublingProfile(BaseModel):
    """g(r) = |Q^ minus Q^_(1/2)|_alpha / |Q^|_alpha as a function of the box height r."""
    n: int
    alpha: float
    radii: List[float]
    values: List[float]
    limit: float  # g(0+) = 1 - 2^-(alpha+1)
    stated_limit: float  # 1 - (1/2)(3/4)^alpha
    min_value: float

    @property
    def C4(self) -> float:
        return 1.0 / self.min_value

    def to_dict(self) -> Dict:
        data = self.dict(exclude={"radii", "values"})
        data["C4"] = self.C4
        data["points"] = len(self.radii)
        return data
