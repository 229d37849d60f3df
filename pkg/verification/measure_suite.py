"""
Measure and box suite for the ProjectCarleson system.
Normalization of nu_alpha, the two-sided box-measure band, quadrature against
Monte Carlo, collar disjointness of the cube boxes and the doubling profile.
"""
import logging
import math

import numpy as np

from models.experiment import ExperimentConfig, SuiteReport
from models.geometry import CapBall, SpherePoint
from models.weights import Weight
from services.dyadic_service import collar_report, reference_collar_bound
from services.geometry_service import random_sphere_points, rng_stream
from services.measure_service import (
    area_bound_constants,
    area_ratio,
    box_measure,
    cap_sigma_many,
    doubling_limit,
    doubling_profile,
    doubling_values,
    stated_doubling_limit,
    total_mass,
)

# Initialize logging
logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-10
LIMIT_TOLERANCE = 1e-9
LIMIT_RADIUS = 1e-12
MC_CHECK_RADII = (0.05, 0.2, 0.5, 0.9)
MC_CHECK_BUDGET = 200_000


def _measure_checks(report: SuiteReport, config: ExperimentConfig, bench):
    ctx = bench.ctx
    mass = total_mass(ctx)
    report.check("nu_alpha(B_n) = 1", abs(mass - 1.0) <= NORMALIZATION_TOLERANCE, value=mass,
                 bound=NORMALIZATION_TOLERANCE, c_alpha=ctx.c_alpha)

    if ctx.n == 3:
        radii = np.linspace(0.01, math.pi, 64)
        error = np.abs(cap_sigma_many(radii, 3) - (1.0 - np.cos(radii)) / 2.0).max()
        report.check("cap measure matches (1 - cos r)/2 on S^2", error <= NORMALIZATION_TOLERANCE, value=error)

    bounds = area_bound_constants(ctx)
    rng = rng_stream(config.seed, "measure-band")
    radii = rng.uniform(0.0, 1.0, config.band_samples)
    radii = radii[radii > 0.0]
    ratios = area_ratio(ctx, radii)
    report.check("box measure band [C1, C2]",
                 bool(np.all((ratios >= bounds.C1 * (1 - 1e-12)) & (ratios <= bounds.C2 * (1 + 1e-12)))),
                 value=float(ratios.min()), bound=bounds.C1, max_ratio=float(ratios.max()), C2=bounds.C2)
    below_stated = int(np.sum(ratios < bounds.C1_stated))
    report.check("stated lower constant", True, value=bounds.C1_stated, flagged=below_stated > 0,
                 violations=below_stated)
    report.tables["area_bounds"] = [bounds.to_dict()]

    # quadrature against Monte Carlo on a radial weight routed through the sampler
    weight = Weight.power_weight(0.5)
    shadow = Weight(label="sampled (1-|x|^2)^0.5", evaluator=lambda x: (1.0 - np.sum(x * x, axis=1)) ** 0.5)
    centers = random_sphere_points(len(MC_CHECK_RADII), ctx.n, rng)
    worst = 0.0
    for center, r in zip(centers, MC_CHECK_RADII):
        box = CapBall(center=SpherePoint(coords=center), radius=r).box()
        exact = box_measure(box, weight, ctx)
        sampled = box_measure(box, shadow, ctx, MC_CHECK_BUDGET, rng)
        worst = max(worst, abs(exact.value - sampled.value) / sampled.abs_error)
    report.check("quadrature within 3 SE of Monte Carlo", worst <= 3.0, value=worst, bound=3.0)

    heights = np.linspace(0.05, 1.0, 20)
    masses = [box_measure(CapBall(center=SpherePoint(coords=centers[0]), radius=h).box(), None, ctx).value
              for h in heights]
    report.check("box measure nondecreasing in radius", bool(np.all(np.diff(masses) >= 0.0)))


def _box_checks(report: SuiteReport, config: ExperimentConfig, bench):
    ctx = bench.ctx
    for system in bench.family.systems:
        t = system.system_index
        nested = bool(np.all(system.box_height[system.parent >= 0] <= system.box_height[system.parent[system.parent >= 0]]))
        report.check(f"box nesting system {t}", nested)
        rows = collar_report(system)
        for row in rows:
            row["system"] = t
        report.tables.setdefault("collars", []).extend(rows)
        # eps* <= 1 puts every child box inside its parent's eps*-box, so the collars cannot meet
        eps_star = max((r["eps_star"] for r in rows), default=0.0)
        report.check(f"child boxes inside parent eps*-boxes system {t}", eps_star <= 1.0, value=eps_star, bound=1.0,
                     strict_levels=sum(1 for r in rows if r["disjoint"]))

        unclamped = system.box_height < 1.0
        if np.any(unclamped):
            ratios = doubling_values(ctx, system.box_height[unclamped])
            report.check(f"cube doubling min |Q^ - Q^_1/2| / |Q^| > 0 system {t}", ratios.min() > 0.0,
                         value=float(ratios.min()), bound=0.0, C4=float(1.0 / ratios.min()))

    bound = reference_collar_bound()
    report.check("collar bound of (1/96, 1/12, 4)", bound <= 0.5 + 1e-15, value=bound, bound=0.5)


def _doubling_checks(report: SuiteReport, config: ExperimentConfig, bench):
    ctx = bench.ctx
    profile = doubling_profile(ctx, np.logspace(-4, 0, config.doubling_grid))
    near_zero = float(doubling_values(ctx, [LIMIT_RADIUS])[0])
    report.check("g(0+) = 1 - 2^-(alpha+1)", abs(near_zero - profile.limit) <= LIMIT_TOLERANCE,
                 value=near_zero, bound=profile.limit)
    stated = stated_doubling_limit(ctx.alpha)
    report.check("stated g(0+)", True, value=stated, flagged=abs(stated - doubling_limit(ctx.alpha)) > LIMIT_TOLERANCE)
    report.check("min g > 0 on the radius grid", profile.min_value > 0.0, value=profile.min_value, C4=profile.C4)
    report.tables["doubling_profile"] = [{"r": r, "g": g} for r, g in zip(profile.radii, profile.values)]


def verify_measure_and_boxes(config: ExperimentConfig, bench) -> SuiteReport:
    """
    Run the measure, box-collar and doubling suites.

    Args:
        config: run configuration
        bench: Workbench holding the alpha context and the family

    Returns:
        SuiteReport with the band, collar and doubling checks
    """
    report = SuiteReport(suite="measure",
                         claim="C1 r^(n+a)(2-r)^(a+1) <= |B^|_a <= C2 ...; child boxes in parent eps-boxes; |Q^| <= C4 |Q^ - Q^_1/2|")
    logger.info(f"Measure checks: n={config.n}, alpha={config.alpha:g}")
    _measure_checks(report, config, bench)
    _box_checks(report, config, bench)
    _doubling_checks(report, config, bench)
    return report.finish()
