"""
Tests for the example weights, dual weights and Bekolle-Bonami constants.
"""
import numpy as np
import pytest

from models.errors import PreconditionViolation, ZeroWeight
from models.experiment import SuiteReport, SuiteStatus
from models.weights import Weight
from services.weight_service import (
    bb_value,
    dual_exponent,
    dual_weight,
    example_weight_bound,
    make_example_weight,
)
from verification.weights_suite import equivalence_checks, verify_weights


def test_example_weight_exponent(ctx):
    weight = make_example_weight(0.25, ctx)
    assert weight.exponent == pytest.approx(0.75)
    assert weight.delta == 0.25
    for delta in (0.0, 1.0, -0.1):
        with pytest.raises(PreconditionViolation):
            make_example_weight(delta, ctx)


def test_dual_exponent():
    assert dual_exponent(2.0) == pytest.approx(2.0)
    assert dual_exponent(4.0) == pytest.approx(4.0 / 3.0)
    with pytest.raises(PreconditionViolation):
        dual_exponent(1.0)


def test_dual_of_power_weight(ctx):
    weight = make_example_weight(0.2, ctx)
    dual = dual_weight(weight, 2.0, ctx)
    assert dual.exponent == pytest.approx(-weight.exponent)
    t = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(weight.radial(t) * dual.radial(t), 1.0)


def test_vanishing_weights_have_no_dual(ctx):
    half = Weight(label="x_1 positive part", evaluator=lambda x: np.maximum(x[:, 0], 0.0))
    with pytest.raises(ZeroWeight):
        dual_weight(half, 2.0, ctx)
    modulus = Weight(label="|x|", radial_profile=lambda t: t)
    with pytest.raises(ZeroWeight):
        dual_weight(modulus, 2.0, ctx)


def test_bb_value():
    assert float(bb_value(np.array(2.0), np.array(0.5), 2.0)) == pytest.approx(1.0)
    assert float(bb_value(np.array(2.0), np.array(4.0), 3.0)) == pytest.approx(32.0)


def test_unit_weight_constants(weight_service, family, operators):
    assert weight_service.bb_constant_balls(Weight.unit(), 2.0).constant == pytest.approx(1.0, abs=1e-12)
    assert weight_service.bb_constant_dyadic(Weight.unit(), 2.0, family, operators).constant == pytest.approx(1.0, abs=1e-12)


def test_scale_invariance(ctx, weight_service):
    weight = make_example_weight(0.2, ctx)
    plain = weight_service.bb_constant_balls(weight, 2.0).constant
    scaled = weight_service.bb_constant_balls(weight.scaled(7.0), 2.0).constant
    assert scaled == pytest.approx(plain, rel=1e-9)


def test_radial_profile_is_at_least_one(ctx, weight_service):
    weight = make_example_weight(0.1, ctx)
    profile = weight_service.bb_radial_profile(weight, 2.0, np.logspace(-3, 0, 40))
    assert np.all(profile >= 1.0 - 1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_dyadic_duality(ctx, weight_service, family, operators, p):
    weight = make_example_weight(0.2, ctx)
    direct = weight_service.bb_constant_dyadic(weight, p, family, operators).constant
    dual = weight_service.bb_constant_dyadic(dual_weight(weight, p, ctx), dual_exponent(p), family, operators).constant
    assert dual == pytest.approx(direct ** (1.0 / (p - 1.0)), rel=1e-9)


def test_constants_grow_as_delta_shrinks(ctx, weight_service, family, operators):
    weights = weight_service.example_family([0.4, 0.2, 0.1])
    balls = [weight_service.bb_constant_balls(w, 2.0).constant for w in weights]
    dyadic = [weight_service.bb_constant_dyadic(w, 2.0, family, operators).constant for w in weights]
    assert balls[0] < balls[1] < balls[2]
    assert dyadic[0] < dyadic[1] < dyadic[2]


def test_explicit_bound_scales_as_inverse_delta(ctx):
    bound = example_weight_bound(ctx, 0.2)
    assert np.isfinite(bound) and bound > 0.0
    assert example_weight_bound(ctx, 0.1) == pytest.approx(2.0 * bound)


def test_non_radial_weights_need_centers(weight_service):
    general = Weight(label="shifted", evaluator=lambda x: 1.0 + x[:, 0] ** 2)
    with pytest.raises(PreconditionViolation):
        weight_service.bb_constant_balls(general, 2.0)


def test_weights_suite_runs(tiny_config, bench):
    report = verify_weights(tiny_config, bench)
    assert report.status != SuiteStatus.ERROR
    by_name = {c.name: c for c in report.checks}
    assert by_name["omega = 1 has constant 1 over balls"].passed
    assert by_name["omega = 1 has constant 1 over cubes"].passed
    for delta in tiny_config.weight_deltas:
        assert by_name[f"duality of dyadic constants, delta={delta:g}"].passed
    assert len(report.tables["weights"]) == len(tiny_config.weight_deltas)


def _equivalence_rows(ratios):
    return [{"delta": d, "dyadic_over_balls": r, "balls_over_dyadic": 1.0 / r}
            for d, r in zip([0.4, 0.2, 0.1, 0.05], ratios)]


def test_equivalence_ratios_within_limit_pass():
    report = SuiteReport(suite="weights", claim="")
    equivalence_checks(report, _equivalence_rows([1.0, 1.5, 2.5, 3.0]))
    assert report.status == SuiteStatus.PASSED
    assert all(c.flagged for c in report.checks)
    assert report.checks[0].value == pytest.approx(3.0)


def test_equivalence_ratios_spreading_past_limit_fail():
    report = SuiteReport(suite="weights", claim="")
    equivalence_checks(report, _equivalence_rows([1.0, 3.0, 30.0, 300.0]))
    assert report.status == SuiteStatus.FAILED
    assert not any(c.passed for c in report.checks)


def test_unbounded_equivalence_ratio_fails():
    report = SuiteReport(suite="weights", claim="")
    equivalence_checks(report, _equivalence_rows([1.0, 1.2, float("inf"), 1.1]))
    assert not report.checks[0].passed
