"""
Weight Service for the ProjectCarleson system.
Handles the example weight family, dual weights and Bekolle-Bonami constants
over cap grids and over the cubes of an adjacent family.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from models.dyadic import AdjacentFamily
from models.errors import PreconditionViolation, ZeroWeight
from models.geometry import CapBall, SpherePoint
from models.measure import AlphaContext
from models.operators import MeasureMode
from models.weights import BBReport, Weight
from .geometry_service import rng_stream
from .measure_service import AlphaSampler, annulus_masses, area_bound_constants, box_measure, make_alpha_context
from .operator_service import OperatorService

# Initialize logging
logger = logging.getLogger(__name__)

RELATIVE_ERROR_FLAG = 0.01
SPOT_CHECK_POINTS = 4096


def make_example_weight(delta: float, ctx: AlphaContext) -> Weight:
    """omega_delta(x) = (1-|x|^2)^s with s = (alpha+1)(1-delta)."""
    if not (0.0 < delta < 1.0):
        raise PreconditionViolation(f"delta must lie in (0, 1), got {delta}")
    s = (ctx.alpha + 1.0) * (1.0 - delta)
    return Weight.power_weight(s, label=f"omega_delta={delta:g}", delta=delta)


def dual_exponent(p: float) -> float:
    if not (1.0 < p < math.inf):
        raise PreconditionViolation(f"p must lie in (1, inf), got {p}")
    return p / (p - 1.0)


def dual_weight(weight: Weight, p: float, ctx: Optional[AlphaContext] = None) -> Weight:
    """
    The weight omega^(1-p') with 1/p + 1/p' = 1.

    Raises:
        ZeroWeight: if omega vanishes on a spot-check sample of nu_alpha
    """
    q = 1.0 - dual_exponent(p)
    if not weight.is_power or weight.evaluator is not None:
        _spot_check_positive(weight, ctx)
    return weight.power(q, label=f"({weight.label})^{q:g}")


def _spot_check_positive(weight: Weight, ctx: Optional[AlphaContext]) -> None:
    if weight.evaluator is None:
        t = np.linspace(0.0, 1.0, SPOT_CHECK_POINTS, endpoint=False)
        zero = np.any(weight.radial(t) <= 0.0)
    else:
        sampler_ctx = ctx if ctx is not None else make_alpha_context(3, 0.0)
        points, _, _ = AlphaSampler(sampler_ctx).sample(SPOT_CHECK_POINTS, rng_stream(0, "zero-weight-check"))
        zero = np.any(weight.evaluate(points) <= 0.0)
    if zero:
        raise ZeroWeight(f"{weight.label} vanishes where a negative power is required")


def bb_value(avg_w: np.ndarray, avg_dual: np.ndarray, p: float) -> np.ndarray:
    """(omega-average) * (omega^(1-p')-average)^(p-1)."""
    return avg_w * np.power(avg_dual, p - 1.0)


def example_weight_bound(ctx: AlphaContext, delta: float) -> float:
    """Explicit upper bound (C2 / (C1 (alpha+1)))^2 / delta for [omega_delta]_{2,alpha}."""
    bounds = area_bound_constants(ctx)
    return (bounds.C2 / (bounds.C1 * (ctx.alpha + 1.0))) ** 2 / delta


class WeightService:
    """
    Service for Bekolle-Bonami constants of weights on B_n.
    Holds the alpha context, the default radius grid and the occupancy threshold.
    """

    def __init__(self, ctx: AlphaContext, radii: Optional[Sequence[float]] = None, min_occupancy: int = 30):
        """Initialize the Weight Service."""
        logger.info("Initializing Weight Service")
        self.ctx = ctx
        self.radii = np.asarray(radii if radii is not None else np.logspace(-4, 0, 64, endpoint=False), dtype=float)
        self.min_occupancy = min_occupancy

    def bb_radial_profile(self, weight: Weight, p: float, radii: Sequence[float]) -> np.ndarray:
        """The cap-box Bekolle-Bonami value as a function of the radius, for a radial weight."""
        if not weight.is_radial:
            raise PreconditionViolation(f"{weight.label} is not radial")
        heights = np.minimum(np.asarray(radii, dtype=float), 1.0)
        dual = dual_weight(weight, p, self.ctx)
        base = annulus_masses(self.ctx, None, heights)
        avg_w = annulus_masses(self.ctx, weight, heights) / base
        avg_dual = annulus_masses(self.ctx, dual, heights) / base
        return bb_value(avg_w, avg_dual, p)

    def bb_constant_balls(self, weight: Weight, p: float, centers: Optional[np.ndarray] = None,
                          radii: Optional[Sequence[float]] = None, budget: int = 100_000,
                          seed: int = 0) -> BBReport:
        """
        Grid maximum of the Bekolle-Bonami value over cap boxes (a lower bound for the supremum).

        Radial weights use one center (rotation invariance) and exact radial
        integrals; other weights scan centers x radii with Monte Carlo box measures.
        """
        radii = self.radii if radii is None else np.asarray(radii, dtype=float)
        if radii.size == 0:
            raise PreconditionViolation("the search grid is empty")
        if weight.is_radial:
            values = self.bb_radial_profile(weight, p, radii)
            best = int(np.argmax(values))
            return BBReport(
                label=weight.label, p=p, alpha=self.ctx.alpha, delta=weight.delta,
                constant=float(values[best]),
                witness={"center": "e1", "radius": float(radii[best])},
                grid=f"{radii.size} radii in [{radii.min():.3g}, {radii.max():.3g}], center e1",
                evaluated=int(radii.size),
            )

        if centers is None or len(centers) == 0:
            raise PreconditionViolation("non-radial weights need a nonempty center grid")
        dual = dual_weight(weight, p, self.ctx)
        rng = rng_stream(seed, f"bb-balls-{weight.label}")
        best_value, witness, worst_error, evaluated = -math.inf, {}, 0.0, 0
        for c in np.atleast_2d(centers):
            for r in radii:
                box = CapBall(center=SpherePoint(coords=c), radius=float(r)).box()
                a = box_measure(box, None, self.ctx)
                mw = box_measure(box, weight, self.ctx, budget, rng)
                md = box_measure(box, dual, self.ctx, budget, rng)
                value = float(bb_value(mw.value / a.value, md.value / a.value, p))
                rel = mw.relative_error + (p - 1.0) * md.relative_error
                worst_error = max(worst_error, rel)
                evaluated += 1
                if value > best_value:
                    best_value, witness = value, {"center": [float(v) for v in c], "radius": float(r)}
        flagged = worst_error > RELATIVE_ERROR_FLAG
        if flagged:
            logger.warning(f"bb_constant_balls({weight.label}): propagated error {worst_error:.2%} exceeds 1%")
        return BBReport(label=weight.label, p=p, alpha=self.ctx.alpha, delta=weight.delta, constant=best_value,
                        witness=witness, grid=f"{len(centers)} centers x {radii.size} radii",
                        evaluated=evaluated, max_relative_error=worst_error, error_flagged=flagged)

    def cube_values(self, operators: OperatorService, t: int, weight: Weight, p: float,
                    mode: Optional[MeasureMode] = None) -> np.ndarray:
        """Bekolle-Bonami value of every cube of system t (nan for unreliable cubes)."""
        dual = dual_weight(weight, p, self.ctx)
        mw = operators.box_measures(t, weight, mode)
        md = operators.box_measures(t, dual, mw.mode)
        reliable = mw.reliable(self.min_occupancy) & (mw.alpha_mass > 0)
        values = np.full(mw.alpha_mass.size, np.nan)
        a = mw.alpha_mass[reliable]
        values[reliable] = bb_value(mw.weight_mass[reliable] / a, md.weight_mass[reliable] / a, p)
        return values

    def bb_constant_dyadic(self, weight: Weight, p: float, family: AdjacentFamily,
                           operators: OperatorService, mode: Optional[MeasureMode] = None) -> BBReport:
        """
        Exact maximum over the cubes of all systems, using pool-based box measures.

        Cubes with fewer than min_occupancy pool points are skipped and counted.
        """
        best_value, witness, skipped, evaluated = -math.inf, {}, 0, 0
        for t, system in enumerate(family.systems):
            values = self.cube_values(operators, t, weight, p, mode)
            finite = np.isfinite(values)
            skipped += int(np.sum(~finite))
            evaluated += int(np.sum(finite))
            if not np.any(finite):
                continue
            cube = int(np.nanargmax(values))
            if values[cube] > best_value:
                best_value = float(values[cube])
                witness = {"system": t, "cube": cube, "level": int(system.level[cube])}
        if skipped:
            logger.warning(f"bb_constant_dyadic({weight.label}): skipped {skipped} cubes below {self.min_occupancy} pool points")
        return BBReport(label=weight.label, p=p, alpha=self.ctx.alpha, delta=weight.delta, constant=best_value,
                        witness=witness, grid=f"all cubes of {family.N} systems, depth {family.depth}",
                        evaluated=evaluated, skipped=skipped)

    def example_family(self, deltas: Sequence[float]) -> List[Weight]:
        return [make_example_weight(d, self.ctx) for d in deltas]

    def family_rows(self, deltas: Sequence[float], p: float, family: AdjacentFamily,
                    operators: OperatorService) -> List[Dict]:
        """Per delta: ball and dyadic constants, delta-scaled values and the two equivalence ratios."""
        rows = []
        for weight in self.example_family(deltas):
            balls = self.bb_constant_balls(weight, p)
            dyadic = self.bb_constant_dyadic(weight, p, family, operators)
            rows.append({
                "delta": weight.delta,
                "s": weight.exponent,
                "bb_balls": balls.constant,
                "bb_dyadic": dyadic.constant,
                "delta_bb_balls": weight.delta * balls.constant,
                "dyadic_over_balls": dyadic.constant / balls.constant,
                "balls_over_dyadic": balls.constant / dyadic.constant,
                "explicit_bound": example_weight_bound(self.ctx, weight.delta) if p == 2.0 else float("nan"),
                "skipped_cubes": dyadic.skipped,
            })
        return rows
