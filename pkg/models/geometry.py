"""
Geometry data models for the ProjectCarleson system.
Points of the unit ball B_n, points of the sphere, caps and Carleson boxes.
"""
import math
from typing import Any, Dict

import numpy as np
from pydantic import BaseModel, validator

from .errors import ZeroDirection

SPHERE_TOLERANCE = 1e-12


def _as_vector(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.size < 3:
        raise ValueError(f"dimension n must be at least 3, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    return arr


class SpherePoint(BaseModel):
    """A point of the unit sphere, renormalized on construction."""
    coords: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator("coords", pre=True)
    def normalize(cls, value):
        arr = _as_vector(value)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("a sphere point needs a nonzero vector")
        arr = arr / norm
        arr.setflags(write=False)
        return arr

    @property
    def n(self) -> int:
        return int(self.coords.size)

    @classmethod
    def basis(cls, n: int, index: int = 0) -> "SpherePoint":
        """The standard basis vector e_{index+1} of R^n."""
        e = np.zeros(n)
        e[index] = 1.0
        return cls(coords=e)

    def to_dict(self) -> Dict:
        return {"coords": self.coords.tolist()}


class BallPoint(BaseModel):
    """A point of the open unit ball B_n (n >= 3)."""
    coords: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator("coords", pre=True)
    def inside_ball(cls, value):
        arr = _as_vector(value)
        if float(np.dot(arr, arr)) >= 1.0:
            raise ValueError("ball points must satisfy |x| < 1")
        arr = arr.copy()
        arr.setflags(write=False)
        return arr

    @property
    def n(self) -> int:
        return int(self.coords.size)

    @property
    def modulus(self) -> float:
        return float(np.linalg.norm(self.coords))

    def direction(self) -> SpherePoint:
        """Return x/|x|."""
        if self.modulus == 0.0:
            raise ZeroDirection("the origin has no direction")
        return SpherePoint(coords=self.coords)

    @classmethod
    def along(cls, direction: SpherePoint, modulus: float) -> "BallPoint":
        return cls(coords=modulus * direction.coords)

    def to_dict(self) -> Dict:
        return {"coords": self.coords.tolist()}


class CapBall(BaseModel):
    """The geodesic cap B_rho(center, radius) on the sphere."""
    center: SpherePoint
    radius: float

    @validator("radius")
    def radius_range(cls, value):
        if not (0.0 < value <= math.pi):
            raise ValueError(f"cap radius must lie in (0, pi], got {value}")
        return float(value)

    @property
    def diameter(self) -> float:
        return min(2.0 * self.radius, math.pi)

    def box(self) -> "CarlesonBox":
        """The Carleson box over the cap; radii of 1 or more clamp the height to 1."""
        return CarlesonBox(base=self, height=min(1.0, self.radius))

    def to_dict(self) -> Dict:
        return {"center": self.center.to_dict(), "radius": self.radius}


class CarlesonBox(BaseModel):
    """
    The set {z : z/|z| in base, 1 - height < |z| < 1}.

    The base is a CapBall or a DyadicCube; both expose contains_directions().
    """
    base: Any
    height: float

    @validator("height")
    def height_range(cls, value):
        if not (0.0 < value <= 1.0):
            raise ValueError(f"box height must lie in (0, 1], got {value}")
        return float(value)

    @property
    def inner_radius(self) -> float:
        return 1.0 - self.height

    def is_cap_box(self) -> bool:
        return isinstance(self.base, CapBall)

    def to_dict(self) -> Dict:
        base = self.base.to_dict() if hasattr(self.base, "to_dict") else str(self.base)
        return {"base": base, "height": self.height}
