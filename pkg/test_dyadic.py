"""
Tests for the dyadic systems, the adjacent family and the cover scan.
"""
import json

import numpy as np
import pytest

from models.dyadic import AdjacentFamily, DyadicSystem
from models.errors import NetTooSparse, PreconditionViolation
from models.experiment import SuiteStatus
from services.dyadic_service import (
    candidate_count,
    collar_report,
    epsilon_box,
    locate,
    locate_brute_force,
    reference_collar_bound,
)
from services.geometry_service import golden_points, random_sphere_points, rng_stream
from verification.dyadic_suite import build_grid, sibling_gap


@pytest.fixture(scope="module")
def system(family) -> DyadicSystem:
    return family.systems[0]


@pytest.fixture(scope="module")
def probes() -> np.ndarray:
    return random_sphere_points(5_000, 3, rng_stream(11, "dyadic-test"))


def test_candidate_count():
    assert candidate_count(3, 0.5, 3) == 4096
    assert candidate_count(3, 0.5, 1) == 2_000
    assert candidate_count(4, 0.5, 3) == 1_000_000


def test_levels_partition_the_sphere(system, probes):
    path = system.descend(probes)
    for k in range(1, system.depth + 1):
        ids = system.ids_at(k)
        assert np.all((path[:, k - 1] >= ids[0]) & (path[:, k - 1] <= ids[-1]))


@pytest.fixture(scope="module")
def sphere_points() -> np.ndarray:
    return random_sphere_points(3_000, 3, rng_stream(12, "partition-test"))


def test_points_sit_in_the_cell_of_their_nearest_center(system, sphere_points):
    path = system.descend(sphere_points)
    for k in range(1, system.depth + 1):
        assert sibling_gap(system, sphere_points, path, k) <= 1e-12


def test_misassigned_point_is_detected(system, sphere_points):
    path = system.descend(sphere_points).copy()
    top = system.ids_at(1)
    wrong = top[top != path[0, 0]][0]
    path[0, 0] = wrong
    assert sibling_gap(system, sphere_points, path, 1) > 0.0


def test_cells_are_nested(system, probes):
    path = system.descend(probes)
    assert np.array_equal(system.parent[path[:, 1:]], path[:, :-1])
    assert np.all(system.parent[system.ids_at(1)] == -1)


def test_centers_lie_in_their_cubes(system):
    own = system.descend(system.centers)
    rows = np.arange(system.size)
    assert np.array_equal(own[rows, system.level - 1], rows)


def test_levels_refine(system):
    counts = [system.count(k) for k in range(1, system.depth + 1)]
    assert all(a < b for a, b in zip(counts, counts[1:]))


def test_locate_matches_brute_force(system, probes):
    for p in probes[:200]:
        assert locate(p, system) == locate_brute_force(p, system)


def test_box_heights_nest(system):
    children = system.parent >= 0
    assert np.all(system.box_height[children] <= system.box_height[system.parent[children]])
    assert np.all(system.box_height <= 1.0)


def test_sandwich_radii_are_realized(system):
    assert len(system.realized_kappa0) == system.depth
    assert system.realized_kappa0_min > 0.0
    assert np.isfinite(system.realized_kappa1_max)


def test_system_round_trips_through_json(family):
    payload = json.loads(json.dumps(family.to_dict()))
    rebuilt = AdjacentFamily.from_dict(payload)
    assert rebuilt.N == family.N
    for a, b in zip(rebuilt.systems, family.systems):
        assert np.array_equal(a.centers, b.centers)
        assert np.array_equal(a.children_pad, b.children_pad)
        assert np.array_equal(a.box_height, b.box_height)


def test_unknown_format_version_is_rejected(system):
    payload = system.to_dict()
    payload["format_version"] = 99
    with pytest.raises(ValueError):
        DyadicSystem.from_dict(payload)


def test_build_preconditions(dyadic_service):
    with pytest.raises(PreconditionViolation):
        dyadic_service.build_system(3, 0.6, 3, 0)
    with pytest.raises(PreconditionViolation):
        dyadic_service.build_system(3, 0.5, 0, 0)
    with pytest.raises(PreconditionViolation):
        dyadic_service.build_family(3, 0.5, 3, 0, 0)


def test_sparse_candidates_raise(dyadic_service):
    with pytest.raises(NetTooSparse) as info:
        dyadic_service.build_system(3, 0.5, 3, 0, candidates=golden_points(50))
    assert info.value.level == 1


def test_epsilon_box(system):
    cube = system.cube(int(system.ids_at(2)[0]))
    assert epsilon_box(cube, 0.25).height == pytest.approx(0.25 * cube.box_height)
    with pytest.raises(PreconditionViolation):
        epsilon_box(cube, 0.0)
    with pytest.raises(PreconditionViolation):
        epsilon_box(cube, 1.5)


def test_collars(system):
    rows = collar_report(system)
    assert [r["level"] for r in rows] == list(range(2, system.depth + 1))
    assert all(r["eps_star"] <= 1.0 for r in rows)
    assert reference_collar_bound() == pytest.approx(0.5)


def test_cube_view(system):
    cube = system.cube(int(system.ids_at(2)[3]))
    assert cube.level == 2
    assert cube.parent == int(system.parent[cube.id])
    assert cube.contains_directions(cube.center.coords[None, :])[0]


def test_cover_constant(family):
    assert np.isfinite(family.cover_constant)
    assert family.cover.caps_covered + family.cover.caps_flagged >= family.cover.caps_tested


def test_grid_suite_runs(tiny_config, bench):
    report = build_grid(tiny_config, bench)
    assert report.status != SuiteStatus.ERROR
    failed = [c.name for c in report.checks if not c.passed]
    assert not failed, failed
