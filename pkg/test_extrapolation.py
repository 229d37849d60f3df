"""
Tests for the Rubio de Francia construction on a small pool and cap grid.
"""
import numpy as np
import pytest

from models.errors import DivisionByZeroWeight, PreconditionViolation
from models.weights import Weight
from services.extrapolation_service import ExtrapolationService, phi, rdf_exponent
from services.operator_service import build_cap_grid, build_pool
from services.weight_service import make_example_weight

P = 4.0


@pytest.fixture(scope="module")
def service(ctx, cap_grid) -> ExtrapolationService:
    small = build_pool(3_000, ctx, None, 7, shards=2, stream="rdf-pool")
    return ExtrapolationService(ctx, small, cap_grid)


def test_phi_and_exponent():
    assert phi(4.0) == pytest.approx(2.0 / 3.0)
    assert rdf_exponent(4.0) == pytest.approx(2.0)
    with pytest.raises(PreconditionViolation):
        phi(2.0)


def test_uncovered_pool_is_rejected(ctx):
    small = build_pool(500, ctx, None, 7, shards=1)
    sparse = build_cap_grid(3, centers=4, radii=[0.05], include_whole=False)
    with pytest.raises(PreconditionViolation):
        ExtrapolationService(ctx, small, sparse)


def test_S_fixes_zero_and_one(service):
    unit = Weight.unit()
    size = service.pool.size
    assert np.all(service.rdf_S(np.zeros(size), unit, P) == 0.0)
    np.testing.assert_allclose(service.rdf_S(np.ones(size), unit, P), 1.0, rtol=1e-12)


def test_S_needs_a_positive_weight(service):
    zero = Weight(label="zero", evaluator=lambda x: np.zeros(x.shape[0]))
    with pytest.raises(DivisionByZeroWeight):
        service.rdf_S(np.ones(service.pool.size), zero, P)


def test_truncated_series(service, ctx):
    weight = make_example_weight(0.4, ctx)
    h = service.test_functions(1, 3)[0]
    assert np.array_equal(service.rdf_D(h, weight, P, 1.0, 0), h)
    with pytest.raises(PreconditionViolation):
        service.series([h], 1.0, -1)
    with pytest.raises(PreconditionViolation):
        service.series([h, h], 0.0, 1)


def test_test_functions_are_positive(service):
    functions = service.test_functions(4, 5)
    assert len(functions) == 4
    assert all(np.all(h >= 0.1) for h in functions)


@pytest.mark.parametrize("delta", [0.4, 0.1])
def test_three_properties_hold(service, ctx, delta):
    report = service.check(make_example_weight(delta, ctx), P, trials=3, depth=6, seed=7)
    assert report.min_gap_I >= 0.0
    assert report.max_norm_ratio_II <= report.bound_II * (1.0 + 1e-9)
    assert report.max_product_ratio <= 1.0 + 1e-9
    assert report.max_ratio_III <= 1.0 + 1e-9
    assert report.A > 0.0
    assert report.bound_II == pytest.approx(2.0 - 2.0 ** -6)


def test_maximal_growth_duality(service, ctx):
    weights = [make_example_weight(d, ctx) for d in (0.4, 0.2)]
    rows = service.maximal_growth(weights, P, witnesses=5)
    assert [r.delta for r in rows] == [0.4, 0.2]
    for row in rows:
        assert row.duality_error <= 1e-9
        assert row.norm_lb > 0.0
        assert row.bb_constant >= 1.0 - 1e-12
