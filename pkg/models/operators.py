"""
Operator data models for the ProjectCarleson system.
"""
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field


class MeasureMode(str, Enum):
    """Where the box integrals of an operator come from."""
    POOL = "pool"  # empirical sums over the sample pool
    RADIAL = "radial"  # pool direction fractions times exact radial integrals


class SamplePool(BaseModel):
    """
    Seeded points of B_n distributed per nu_alpha, located in every system.

    leaves[t][j] is the leaf cube of point j in system t; deepest[t][j] is
    the deepest cube whose Carleson box contains point j (-1 when none).
    """
    n: int
    alpha: float
    seed: int
    points: np.ndarray
    modulus: np.ndarray
    one_minus_sq: np.ndarray
    leaves: List[np.ndarray] = Field(default_factory=list)
    deepest: List[np.ndarray] = Field(default_factory=list)
    shards: int = 1

    class Config:
        arbitrary_types_allowed = True

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def directions(self) -> np.ndarray:
        return self.points / self.modulus[:, None]

    def to_dict(self) -> Dict:
        return {"n": self.n, "alpha": self.alpha, "seed": self.seed, "size": self.size,
                "systems": len(self.leaves), "shards": self.shards}


class BoxMeasures(BaseModel):
    """Per-cube box masses of one system under nu_alpha and under omega dnu_alpha."""
    system_index: int
    mode: MeasureMode
    weight_label: str
    alpha_mass: np.ndarray
    weight_mass: np.ndarray
    occupancy: np.ndarray  # pool points inside each box
    cell_sigma: Optional[np.ndarray] = None  # sphere measure of each cell (radial mode)

    class Config:
        arbitrary_types_allowed = True

    def reliable(self, min_occupancy: int) -> np.ndarray:
        return self.occupancy >= min_occupancy


class BoxFunction(BaseModel):
    """f = sum_Q c_Q chi_{Q^} over the cubes of one system."""
    system_index: int
    coefficients: np.ndarray
    label: str = ""
    unreliable: int = 0  # boxes with pool occupancy below the threshold

    class Config:
        arbitrary_types_allowed = True

    def rows(self) -> List[Dict]:
        """cube id -> coefficient rows for CSV export."""
        return [{"system": self.system_index, "cube": int(i), "coefficient": float(c)}
                for i, c in enumerate(self.coefficients)]

    def to_dict(self) -> Dict:
        return {"system_index": self.system_index, "label": self.label, "unreliable": self.unreliable,
                "coefficients": self.coefficients.tolist()}


class NormReport(BaseModel):
    """Estimate of the norm of T_{omega^-1}: L^2(omega^-1 dnu_alpha) -> L^2(omega dnu_alpha)."""
    system_index: int
    weight_label: str
    mode: MeasureMode
    lower_bound: float
    power_iter_estimate: float
    iterations: int
    residual: float
    converged: bool
    blocks: int = 1
    restarts: int = 0
    dense_oracle: Optional[float] = None
    symmetry_error: Optional[float] = None

    def row(self) -> Dict:
        return self.dict()

    def to_dict(self) -> Dict:
        return self.dict()


class CapGrid(BaseModel):
    """Finite family of cap boxes standing in for all boxes in a supremum (lower-bound semantics)."""
    centers: np.ndarray  # (G, n)
    radii: np.ndarray  # (G,)
    description: str = ""

    class Config:
        arbitrary_types_allowed = True

    @property
    def size(self) -> int:
        return int(self.radii.size)

    @property
    def heights(self) -> np.ndarray:
        return np.minimum(1.0, self.radii)

    def to_dict(self) -> Dict:
        return {"size": self.size, "description": self.description}


class DominationReport(BaseModel):
    """Ratios [x,y]^-(n+alpha) / sum_t K^t(x,y) over sampled pairs in the resolution window."""
    seed: int
    pairs: int
    floor: float
    ceiling: float
    zero_kernel: int  # pairs sharing no box in any system
    max_ratio: float
    median_ratio: float

    def to_dict(self) -> Dict:
        return self.dict()


class ExtrapolationReport(BaseModel):
    """Realized Rubio de Francia quantities for one weight over a cap grid and a small pool."""
    weight_label: str
    p: float
    phi: float
    norm_exponent: float  # p'/phi(p) = p/(p-2)
    A: float
    truncation: int
    trials: int
    bb_grid: float  # [omega]_{p} over the grid, empirical averages
    min_gap_I: float  # min over trials and points of D(h) - h
    max_norm_ratio_II: float  # max ||D(h)|| / ||h||
    bound_II: float  # 2 - 2^-KD
    max_product_ratio: float  # max over boxes of the product over its box bound^{1/(p-1)}
    max_bb_III: float  # max [D(h) omega]_{2} over trials
    bound_III: float  # 2 A [omega]_p^{1/(p-1)} times the largest truncation factor
    truncation_factor: float  # max over trials of max D_{KD+1}(h) / D_KD(h)
    max_ratio_III: float  # max over trials of [D(h) omega]_2 over its own bound

    def to_dict(self) -> Dict:
        return self.dict()


class MaximalGrowthRow(BaseModel):
    """Lower bound for ||M_alpha|| on L^p(omega dnu_alpha) next to [omega]_p^{1/(p-1)}."""
    delta: float
    p: float
    bb_constant: float
    bb_power: float  # [omega]_p^{1/(p-1)}
    norm_lb: float
    ratio: float  # norm_lb / bb_power
    dual_bb_constant: float  # [omega^{1-p'}]_{p'}
    duality_error: float  # |dual_bb_constant - bb_power| / bb_power
    dual_norm_lb: float  # ||M_alpha|| on L^{p'}(omega^{1-p'} dnu_alpha)

    def row(self) -> Dict:
        return self.dict()
