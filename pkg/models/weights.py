"""
Weight data models for the ProjectCarleson system.
"""
from typing import Any, Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, validator


class Weight(BaseModel):
    """
    A weight on B_n.

    Power weights scale*(1-|x|^2)^exponent carry their exponent so that box
    integrals reduce to incomplete beta functions; other radial weights give a
    radial_profile of t=|x|; general weights give an evaluator on points.
    """
    label: str
    exponent: Optional[float] = None
    scale: float = 1.0
    radial_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    delta: Optional[float] = None

    class Config:
        arbitrary_types_allowed = True

    @validator("scale")
    def positive_scale(cls, value):
        if value <= 0:
            raise ValueError("weight scale must be positive")
        return value

    @validator("evaluator", always=True)
    def has_definition(cls, value, values):
        if value is None and values.get("exponent") is None and values.get("radial_profile") is None:
            raise ValueError("a weight needs an exponent, a radial profile or an evaluator")
        return value

    @classmethod
    def unit(cls) -> "Weight":
        """The weight identically equal to 1."""
        return cls(label="one", exponent=0.0)

    @classmethod
    def power_weight(cls, exponent: float, label: Optional[str] = None,
                     delta: Optional[float] = None, scale: float = 1.0) -> "Weight":
        return cls(label=label or f"(1-|x|^2)^{exponent:g}", exponent=float(exponent),
                   scale=scale, delta=delta)

    @property
    def is_power(self) -> bool:
        return self.exponent is not None

    @property
    def is_radial(self) -> bool:
        return self.exponent is not None or self.radial_profile is not None

    @property
    def is_unit(self) -> bool:
        return self.exponent == 0.0 and self.scale == 1.0

    def radial(self, t: np.ndarray) -> np.ndarray:
        """Value of a radial weight at modulus t."""
        t = np.asarray(t, dtype=float)
        if self.exponent is not None:
            return self.scale * np.power(1.0 - t * t, self.exponent)
        if self.radial_profile is not None:
            return self.scale * np.asarray(self.radial_profile(t), dtype=float)
        raise ValueError(f"weight {self.label} is not radial")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at an (m, n) array of ball points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.evaluator is not None:
            return self.scale * np.asarray(self.evaluator(pts), dtype=float)
        return self.radial(np.linalg.norm(pts, axis=1))

    def evaluate_on(self, modulus: np.ndarray, one_minus_sq: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Values on precomputed pool columns; power weights use 1-|x|^2 directly."""
        if self.exponent is not None and self.evaluator is None:
            if self.exponent == 0.0:
                return np.full(one_minus_sq.shape, self.scale)
            return self.scale * np.power(one_minus_sq, self.exponent)
        if self.evaluator is None:
            return self.radial(modulus)
        return self.evaluate(points)

    def scaled(self, factor: float) -> "Weight":
        return self.copy(update={"scale": self.scale * factor, "label": f"{factor:g}*{self.label}"})

    def power(self, q: float, label: Optional[str] = None) -> "Weight":
        """The weight omega^q."""
        name = label or f"({self.label})^{q:g}"
        if self.exponent is not None and self.evaluator is None:
            return Weight(label=name, exponent=self.exponent * q, scale=self.scale ** q, delta=self.delta)
        base = self
        if self.evaluator is None:
            profile = self.radial_profile
            scale = self.scale
            return Weight(label=name, radial_profile=lambda t: np.power(scale * profile(t), q), delta=self.delta)
        return Weight(label=name, evaluator=lambda x: np.power(base.evaluate(x), q), delta=self.delta)

    def to_dict(self) -> Dict:
        return {"label": self.label, "exponent": self.exponent, "scale": self.scale, "delta": self.delta}


class BBReport(BaseModel):
    """A Bekolle-Bonami constant over a finite search set, with its arg-max witness."""
    label: str
    p: float
    alpha: float
    delta: Optional[float] = None
    constant: float
    witness: Dict[str, Any]
    grid: str
    evaluated: int
    skipped: int = 0
    max_relative_error: float = 0.0
    error_flagged: bool = False

    def row(self) -> Dict[str, Any]:
        """Flat CSV row."""
        witness = ";".join(f"{k}={v}" for k, v in self.witness.items())
        return {
            "label": self.label,
            "p": self.p,
            "alpha": self.alpha,
            "delta": self.delta,
            "constant": self.constant,
            "witness": witness,
            "grid": self.grid,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
        }

    def to_dict(self) -> Dict:
        return self.dict()
