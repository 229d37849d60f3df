"""
Tests for nu_alpha, the box measure, the area band and the doubling profile.
"""
import math

import numpy as np
import pytest

from models.errors import EmptyBox, InvalidAlpha, PreconditionViolation
from models.experiment import SuiteStatus
from models.geometry import CapBall, CarlesonBox, SpherePoint
from models.measure import MeasureMethod
from models.weights import Weight
from services.geometry_service import rng_stream
from services.measure_service import (
    AlphaSampler,
    area_bound_constants,
    area_ratio,
    box_measure,
    cap_sigma,
    cap_sigma_many,
    doubling_limit,
    doubling_profile,
    doubling_values,
    make_alpha_context,
    radial_tail_mass,
    stated_doubling_limit,
    total_mass,
    weighted_radial_mass,
)
from verification.measure_suite import verify_measure_and_boxes


def _cap_box(radius: float) -> CarlesonBox:
    return CapBall(center=SpherePoint.basis(3), radius=radius).box()


@pytest.mark.parametrize("n,alpha", [(3, 0.0), (3, 1.0), (4, -0.5), (5, 2.5), (3, -0.9)])
def test_total_mass_is_one(n, alpha):
    assert total_mass(make_alpha_context(n, alpha)) == pytest.approx(1.0, abs=1e-10)


def test_alpha_constants():
    assert make_alpha_context(3, 0.0).c_alpha == pytest.approx(1.0)
    assert make_alpha_context(3, 1.0).c_alpha == pytest.approx(2.5)


def test_invalid_alpha():
    with pytest.raises(InvalidAlpha):
        make_alpha_context(3, -1.0)
    with pytest.raises(PreconditionViolation):
        make_alpha_context(2, 0.0)


def test_cap_box_closed_forms():
    ctx0 = make_alpha_context(3, 0.0)
    ctx1 = make_alpha_context(3, 1.0)
    assert box_measure(_cap_box(0.5), None, ctx0).value == pytest.approx(0.05355763, rel=1e-6)
    expected = 0.734375 * (1.0 - math.cos(0.5)) / 2.0
    assert box_measure(_cap_box(0.5), None, ctx1).value == pytest.approx(expected, rel=1e-9)


def test_cap_sigma_paths_agree():
    radii = np.array([0.01, 0.3, 1.0, 1.5, 2.0, 3.0])
    for n in (3, 4, 6):
        quad = np.array([cap_sigma(r, n) for r in radii])
        np.testing.assert_allclose(cap_sigma_many(radii, n), quad, rtol=1e-9)
    assert cap_sigma(math.pi, 4) == 1.0
    with pytest.raises(PreconditionViolation):
        cap_sigma(0.0, 3)


def test_power_weight_annulus_matches_quadrature(ctx):
    power = Weight.power_weight(0.5)
    profile = Weight(label="radial (1-t^2)^0.5", radial_profile=lambda t: (1.0 - t * t) ** 0.5)
    closed = weighted_radial_mass(0.3, ctx, power).value
    quad = weighted_radial_mass(0.3, ctx, profile).value
    assert closed == pytest.approx(quad, rel=1e-8)
    assert closed == pytest.approx(ctx.c_alpha * float(radial_tail_mass(0.3, 0.5, 3)))


def test_empty_box_raises(ctx):
    with pytest.raises(EmptyBox):
        weighted_radial_mass(0.0, ctx)


def test_monte_carlo_path_reports_error_bar(ctx):
    shadow = Weight(label="sampled one", evaluator=lambda x: np.ones(x.shape[0]))
    value = box_measure(_cap_box(0.5), shadow, ctx, budget=20_000, rng=rng_stream(3, "mc-test"))
    assert value.method == MeasureMethod.MONTE_CARLO
    assert value.abs_error >= 0.0
    assert value.value == pytest.approx(0.05355763, rel=1e-9)


def test_sampler_matches_beta_law(ctx):
    _, modulus, s = AlphaSampler(ctx).sample(50_000, rng_stream(4, "sampler-test"))
    assert np.all((modulus > 0.0) & (modulus < 1.0))
    assert s.mean() == pytest.approx(0.4, abs=0.01)


def test_sampler_stays_in_cap(ctx):
    cap = CapBall(center=SpherePoint.basis(3, 1), radius=0.3)
    directions = AlphaSampler(ctx).cap_directions(cap, 2_000, rng_stream(5, "cap-test"))
    angles = np.arccos(np.clip(directions @ cap.center.coords, -1.0, 1.0))
    assert angles.max() <= 0.3 + 1e-12


def test_area_band_and_stated_constant(ctx):
    bounds = area_bound_constants(ctx)
    ratios = area_ratio(ctx, np.linspace(0.01, 1.0, 200))
    assert np.all(ratios >= bounds.C1 * (1 - 1e-12))
    assert np.all(ratios <= bounds.C2 * (1 + 1e-12))
    assert bounds.C1 == pytest.approx(0.129290, rel=1e-4)
    assert bounds.C1_stated == pytest.approx(0.258580, rel=1e-4)
    assert float(area_ratio(ctx, 1.0)) == pytest.approx(0.229849, rel=1e-5)
    assert float(area_ratio(ctx, 1.0)) < bounds.C1_stated


def test_doubling_limits():
    assert doubling_limit(0.0) == pytest.approx(0.5)
    assert doubling_limit(1.0) == pytest.approx(0.75)
    assert stated_doubling_limit(1.0) == pytest.approx(0.625)
    for alpha in (0.0, 1.0, -0.5):
        near_zero = float(doubling_values(make_alpha_context(3, alpha), [1e-12])[0])
        assert near_zero == pytest.approx(doubling_limit(alpha), abs=1e-9)


def test_doubling_profile_positive(ctx):
    profile = doubling_profile(ctx, np.logspace(-3, 0, 30))
    assert profile.min_value > 0.0
    assert profile.C4 == pytest.approx(1.0 / profile.min_value)
    assert len(profile.values) == 30


def test_measure_suite_runs(tiny_config, bench):
    report = verify_measure_and_boxes(tiny_config, bench)
    assert report.status != SuiteStatus.ERROR
    by_name = {c.name: c for c in report.checks}
    assert by_name["nu_alpha(B_n) = 1"].passed
    assert by_name["g(0+) = 1 - 2^-(alpha+1)"].passed
    assert by_name["collar bound of (1/96, 1/12, 4)"].passed
    assert "doubling_profile" in report.tables
