"""
Dyadic grid suite for the ProjectCarleson system.
Builds the adjacent family and checks partition, nesting, the ball sandwich,
locate() against brute force, and the realized cover constant.
"""
import logging

import numpy as np

from models.experiment import ExperimentConfig, SuiteReport
from services.dyadic_service import locate_brute_force
from services.geometry_service import random_sphere_points, rng_stream

# Initialize logging
logger = logging.getLogger(__name__)

BRUTE_FORCE_POINTS = 2_000


def sibling_gap(system, points: np.ndarray, path: np.ndarray, k: int, chunk: int = 65536) -> float:
    """
    Largest excess of a competing center's cosine over the assigned one at level k.

    Competitors are the level-1 centers at k = 1 and the children of the assigned
    parent below that, so a nonpositive gap means every point sits in the cell
    of its nearest candidate center.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    pts = pts / np.linalg.norm(pts, axis=1)[:, None]
    gap = -np.inf
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        cell = path[start:start + chunk, k - 1]
        own = np.einsum("bn,bn->b", system.centers[cell], block)
        if k == 1:
            rivals = block @ system.centers[system.ids_at(1)].T
        else:
            candidates = system.children_pad[path[start:start + chunk, k - 2]]
            valid = candidates >= 0
            rivals = np.einsum("bcn,bn->bc", system.centers[np.where(valid, candidates, 0)], block)
            rivals[~valid] = -np.inf
        gap = max(gap, float(np.max(rivals.max(axis=1) - own)))
    return gap


def _system_checks(report: SuiteReport, system, probes: np.ndarray, brute: np.ndarray):
    t = system.system_index
    path = system.descend(probes)

    for k in range(1, system.depth + 1):
        ids = system.ids_at(k)
        cell = path[:, k - 1]
        in_level = (cell >= ids[0]) & (cell < ids[0] + ids.size)
        assigned = float(in_level.mean())
        gap = sibling_gap(system, probes, path, k) if assigned == 1.0 else float("inf")
        occupied = np.bincount(cell[in_level] - ids[0], minlength=ids.size)
        report.check(f"level {k} cells partition the sphere, system {t}",
                     assigned >= 1.0 - 1e-6 and gap <= 1e-12,
                     value=assigned, bound=1.0, nearest_center_gap=gap, empty_cells=int(np.sum(occupied == 0)))

    if system.depth > 1:
        nested = np.all(system.parent[path[:, 1:]] == path[:, :-1])
        report.check(f"nesting of cells, system {t}", bool(nested))

    own = system.descend(system.centers)
    rows = np.arange(system.size)
    report.check(f"centers lie in their own cubes, system {t}",
                 bool(np.all(own[rows, system.level - 1] == rows)))

    kappa0 = np.asarray(system.realized_kappa0)
    kappa1 = np.asarray(system.realized_kappa1)
    report.check(f"ball sandwich radii, system {t}",
                 bool(np.all(kappa0 > 0.0) and np.all(np.isfinite(kappa1))),
                 value=float(np.nanmin(kappa0)), bound=float(np.max(kappa1)))
    for k, (k0, k1) in enumerate(zip(system.realized_kappa0, system.realized_kappa1), start=1):
        report.tables.setdefault("kappas", []).append({
            "system": t, "level": k, "cubes": system.count(k), "kappa0": k0, "kappa1": k1,
        })

    fast = system.descend(brute)
    slow = np.array([locate_brute_force(p, system) for p in brute])
    report.check(f"locate agrees with brute-force descent, system {t}", bool(np.array_equal(fast, slow)),
                 value=int(np.sum(np.any(fast != slow, axis=1))), bound=0)

    nested_heights = system.box_height[system.parent >= 0] <= system.box_height[system.parent[system.parent >= 0]]
    report.check(f"R in Q implies R^ in Q^, system {t}", bool(np.all(nested_heights)))


def build_grid(config: ExperimentConfig, bench) -> SuiteReport:
    """
    Build (or reuse) the adjacent family of the workbench and check its structure.

    Args:
        config: run configuration
        bench: Workbench; its family is built here when missing

    Returns:
        SuiteReport with per-system structure checks and the cover constant
    """
    report = SuiteReport(suite="grid", claim="adjacent dyadic systems: partition, nesting, ball sandwich, cover constant C3")
    family = bench.family
    logger.info(f"Checking {family.N} dyadic systems of depth {family.depth}")
    rng = rng_stream(config.seed, "grid-suite")
    probes = random_sphere_points(config.probe_points, config.n, rng)
    brute = random_sphere_points(BRUTE_FORCE_POINTS, config.n, rng)
    for system in family.systems:
        _system_checks(report, system, probes, brute)

    cover = family.cover
    if cover is not None:
        report.check("every fine test cap covered", cover.caps_covered + cover.caps_flagged >= cover.caps_tested,
                     value=cover.cover_constant, flagged=cover.caps_flagged > 0,
                     caps=cover.caps_tested, systems=family.N)
        report.tables["cover"] = [cover.to_dict()]
    report.check("cover constant finite", bool(np.isfinite(family.cover_constant)), value=family.cover_constant)
    return report.finish()
