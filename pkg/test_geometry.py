"""
Tests for the sphere metric, the bracket, enclosing caps and the region G.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.errors import DegenerateRegion, PreconditionViolation, ZeroDirection
from models.experiment import ExperimentConfig, SuiteStatus
from models.geometry import BallPoint, CapBall, SpherePoint
from services.geometry_service import (
    bracket,
    bracket_many,
    box_contains,
    cap_contains,
    chord_from_rho,
    enclosing_cap,
    enclosing_cap_many,
    in_nontangential,
    in_region_G,
    random_ball_points,
    region_G_mask,
    rho,
    rho_from_chord,
    rho_many,
    rng_stream,
)
from verification.geometry_suite import verify_geometry


def test_rho_basic_values(e1):
    assert rho(e1, e1) == 0.0
    assert rho(e1, -e1) == pytest.approx(math.pi)
    assert rho(e1, [0.0, 1.0, 0.0]) == pytest.approx(math.pi / 2)


def test_rho_ignores_modulus(e1):
    assert rho(0.3 * e1, [0.0, 0.5, 0.0]) == pytest.approx(rho(e1, [0.0, 1.0, 0.0]))


def test_rho_of_origin_raises(e1):
    with pytest.raises(ZeroDirection):
        rho(np.zeros(3), e1)


def test_near_antipodal_pairs_stay_in_range():
    rng = rng_stream(1, "antipodal-test")
    x = rng.standard_normal((500, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    y = -x + 1e-12 * rng.standard_normal((500, 3))
    d = rho_many(x, y)
    assert np.all(np.isfinite(d))
    assert d.max() <= math.pi


def test_chord_and_rho_are_inverse():
    r = np.linspace(0.01, math.pi - 0.01, 17)
    np.testing.assert_allclose(rho_from_chord(chord_from_rho(r)), r, atol=1e-12)


def test_bracket_special_points(e1):
    x = 0.6 * e1
    assert bracket(x, x) == pytest.approx(1.0 - 0.36)
    assert bracket(np.zeros(3), [0.2, 0.3, -0.4]) == pytest.approx(1.0)


def test_bracket_lower_bounds():
    rng = rng_stream(2, "bracket-test")
    x = random_ball_points(1_000, 4, rng)
    y = random_ball_points(1_000, 4, rng)
    mx = np.linalg.norm(x, axis=1)
    my = np.linalg.norm(y, axis=1)
    br = bracket_many(x, y)
    assert np.all(br >= 1.0 - mx * my - 1e-12)
    assert np.allclose(br, bracket_many(y, x))


def test_enclosing_cap_holds_both_points(e1):
    x = 0.9 * e1
    y = 0.5 * np.array([math.cos(0.2), math.sin(0.2), 0.0])
    cap = enclosing_cap(x, y)
    assert cap.radius == pytest.approx(0.5)
    assert np.allclose(cap.center.coords, e1)
    inside = box_contains(cap.box(), np.vstack([x, y]), closed=True)
    assert inside.all()
    assert bracket(x, y) >= 2.0 / math.pi * cap.radius


def test_enclosing_cap_errors(e1):
    with pytest.raises(PreconditionViolation):
        enclosing_cap(0.5 * e1, 0.5 * e1)
    with pytest.raises(ZeroDirection):
        enclosing_cap_many(np.zeros((1, 3)), np.zeros((1, 3)))


def test_cap_contains_uses_directions(e1):
    cap = CapBall(center=SpherePoint(coords=e1), radius=0.3)
    points = np.array([
        0.1 * e1,
        [math.cos(0.2), math.sin(0.2), 0.0],
        0.5 * np.array([math.cos(0.4), 0.0, math.sin(0.4)]),
    ])
    assert cap_contains(cap, points).tolist() == [True, True, False]


def test_nontangential_cone(e1):
    assert in_nontangential(0.5 * e1, e1, gamma=0.4)
    assert not in_nontangential(np.array([0.0, 0.5, 0.0]), e1, gamma=0.4)
    assert not in_nontangential(-0.5 * e1, e1, gamma=0.4)


def test_region_G(e1):
    assert in_region_G(0.1 * e1, gamma=0.4, r0=1.0)
    assert not in_region_G(np.zeros(3), gamma=0.4, r0=1.0)
    assert not region_G_mask(np.array([[0.0, 0.1, 0.0]]), gamma=0.4, r0=1.0)[0]
    with pytest.raises(DegenerateRegion):
        region_G_mask(np.array([[0.1, 0.0, 0.0]]), gamma=0.4, r0=math.pi / 2)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.6])
def test_region_G_needs_gamma_below_one_half(e1, gamma):
    with pytest.raises(PreconditionViolation):
        region_G_mask(0.1 * e1[None, :], gamma=gamma, r0=1.0)


def test_rng_streams_are_independent_and_reproducible():
    a = rng_stream(7, "pool").random(5)
    b = rng_stream(7, "pool").random(5)
    c = rng_stream(7, "grid").random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_point_models_validate():
    assert np.allclose(SpherePoint(coords=[3.0, 0.0, 4.0]).coords, [0.6, 0.0, 0.8])
    with pytest.raises(ValidationError):
        SpherePoint(coords=[0.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        BallPoint(coords=[1.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        CapBall(center=SpherePoint.basis(3), radius=0.0)
    assert CapBall(center=SpherePoint.basis(3), radius=2.0).box().height == 1.0


def test_geometry_suite_passes(tiny_config: ExperimentConfig):
    report = verify_geometry(tiny_config)
    failed = [c.name for c in report.checks if not c.passed]
    assert report.status == SuiteStatus.PASSED, failed
    assert any(c.name == "G inside every cone over B_0" for c in report.checks)
