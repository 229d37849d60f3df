"""
Geometry suite for the ProjectCarleson system.
Metric axioms of rho, the chord/rho equivalence, bracket lower bounds and
the enclosing-cap bound [x,y] >= (2/pi) r, on seeded samples in several dimensions.
"""
import logging
import math

import numpy as np

from models.experiment import ExperimentConfig, SuiteReport
from models.geometry import CapBall, SpherePoint
from services.geometry_service import (
    bracket_many,
    enclosing_cap_many,
    nontangential_mask,
    random_ball_points,
    random_sphere_points,
    region_G_mask,
    rho_many,
    rng_stream,
)
from services.measure_service import AlphaSampler, make_alpha_context

# Initialize logging
logger = logging.getLogger(__name__)

TOLERANCE = 1e-10
CONE_APEXES = 200


def _metric_checks(report: SuiteReport, n: int, m: int, seed: int):
    rng = rng_stream(seed, f"geometry-metric-{n}")
    x, y, z = (random_sphere_points(m, n, rng) for _ in range(3))
    dxy, dyx = rho_many(x, y), rho_many(y, x)
    excess = dxy - rho_many(x, z) - rho_many(z, y)
    report.check(f"triangle inequality n={n}", excess.max() <= TOLERANCE, value=excess.max(), bound=TOLERANCE,
                 samples=m)
    report.check(f"rho symmetric n={n}", np.array_equal(dxy, dyx), value=float(np.abs(dxy - dyx).max()))
    report.check(f"rho range n={n}", bool(np.all((dxy >= 0.0) & (dxy <= math.pi))), value=dxy.max(), bound=math.pi)

    chord = np.linalg.norm(x - y, axis=1)
    low = (2.0 / math.pi) * dxy - chord
    high = chord - dxy
    worst = max(low.max(), high.max())
    report.check(f"(2/pi) rho <= |x-y| <= rho n={n}", worst <= TOLERANCE, value=worst, bound=TOLERANCE)

    # near-antipodal pairs exercise the clamp in arccos
    noise = 1e-9 * rng.standard_normal((m, n))
    anti = -x + noise
    anti /= np.linalg.norm(anti, axis=1)[:, None]
    d_anti = rho_many(x, anti)
    triangle = rho_many(x, anti) - rho_many(x, z) - rho_many(z, anti)
    report.check(f"near-antipodal pairs n={n}",
                 bool(np.all(np.isfinite(d_anti)) and d_anti.max() <= math.pi and triangle.max() <= TOLERANCE),
                 value=triangle.max(), bound=TOLERANCE)


def _bracket_checks(report: SuiteReport, n: int, m: int, seed: int):
    rng = rng_stream(seed, f"geometry-bracket-{n}")
    a = random_ball_points(m, n, rng)
    b = random_ball_points(m, n, rng)
    swap = np.linalg.norm(b, axis=1) > np.linalg.norm(a, axis=1)
    x = np.where(swap[:, None], b, a)
    y = np.where(swap[:, None], a, b)
    my = np.linalg.norm(y, axis=1)
    br = bracket_many(x, y)
    theta = rho_many(x, y)

    radial = (1.0 - my) ** 2 - br ** 2
    angular = (4.0 / math.pi ** 2) * my ** 2 * theta ** 2 - br ** 2
    worst = max(radial.max(), angular.max())
    report.check(f"bracket lower bounds n={n}", worst <= TOLERANCE, value=worst, bound=TOLERANCE)
    report.check(f"bracket symmetric n={n}", np.allclose(br, bracket_many(y, x), rtol=0.0, atol=1e-15))

    centers, radii = enclosing_cap_many(x, y)
    small = radii < 1.0
    bound_gap = (2.0 / math.pi) * radii[small] - br[small]
    report.check(f"[x,y] >= (2/pi) r for r < 1, n={n}", bound_gap.max(initial=-math.inf) <= TOLERANCE,
                 value=bound_gap.max(initial=-math.inf), bound=TOLERANCE,
                 pairs=int(small.sum()), large_caps=int((~small).sum()))

    # closed-box containment of both points
    contained = np.ones(small.sum(), dtype=bool)
    for p in (x[small], y[small]):
        modulus = np.linalg.norm(p, axis=1)
        angle = rho_many(p, centers[small])
        contained &= (angle <= radii[small] + TOLERANCE) & (modulus >= 1.0 - radii[small] - TOLERANCE)
    report.check(f"enclosing box contains both points n={n}", bool(contained.all()),
                 value=float((~contained).sum()), bound=0.0)


def _region_checks(report: SuiteReport, config: ExperimentConfig):
    """Sampled G inside every cone Omega_gamma(xi) with xi in B_rho(e1, r0)."""
    n, gamma, r0 = config.n, config.gamma, config.r0
    rng = rng_stream(config.seed, "geometry-region-G")
    limit = gamma / math.sqrt(1.0 + gamma ** 2)
    points = random_ball_points(config.band_samples * 10, n, rng, max_modulus=limit)
    inside = points[region_G_mask(points, gamma, r0)]
    e1 = np.zeros(n)
    e1[0] = 1.0
    sampler = AlphaSampler(make_alpha_context(n, 0.0))
    apexes = sampler.cap_directions(CapBall(center=SpherePoint(coords=e1), radius=r0), CONE_APEXES, rng)
    misses = sum(int(np.sum(~nontangential_mask(inside, xi, gamma))) for xi in apexes)
    report.check("G inside every cone over B_0", misses == 0, value=misses, bound=0,
                 points=int(inside.shape[0]), apexes=CONE_APEXES)


def verify_geometry(config: ExperimentConfig, bench=None) -> SuiteReport:
    """
    Run the geometry property suites.

    Args:
        config: run configuration (metric_samples, metric_dimensions, gamma, r0)
        bench: unused; accepted for a uniform suite signature

    Returns:
        SuiteReport with one check per property and dimension
    """
    report = SuiteReport(suite="geometry", claim="rho is a metric; (2/pi)rho <= |x-y| <= rho; [x,y] >= (2/pi) r")
    for n in config.metric_dimensions:
        logger.info(f"Geometry checks in dimension {n} on {config.metric_samples} samples")
        _metric_checks(report, n, config.metric_samples, config.seed)
        _bracket_checks(report, n, config.metric_samples, config.seed)
    _region_checks(report, config)
    return report.finish()
