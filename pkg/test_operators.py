"""
Tests for the sample pool, the positive dyadic operator, its kernel and the maximal functions.
"""
import numpy as np
import pytest

from models.errors import NonConvergence, PreconditionViolation
from models.experiment import SuiteReport, SuiteStatus
from models.geometry import CapBall, SpherePoint
from models.operators import DominationReport, MeasureMode
from models.weights import Weight
from services.geometry_service import random_ball_points, rng_stream
from services.measure_service import box_measure
from services.operator_service import (
    OperatorService,
    aggregate_up,
    apply_global_maximal,
    build_pool,
    gram_apply,
    pool_box_mass,
    prefix_down,
)
from services.weight_service import make_example_weight
from verification.operators_suite import domination_checks, norm_ratio_check, verify_operators


def test_pool_is_thread_invariant(ctx, family):
    one = build_pool(4_000, ctx, family, 3, shards=4, threads=1)
    many = build_pool(4_000, ctx, family, 3, shards=4, threads=3)
    assert np.array_equal(one.points, many.points)
    for a, b in zip(one.deepest, many.deepest):
        assert np.array_equal(a, b)


def test_pool_lies_in_the_ball(pool):
    assert np.all(pool.modulus < 1.0)
    np.testing.assert_allclose(np.linalg.norm(pool.points, axis=1), pool.modulus)


def test_pool_box_mass_matches_quadrature(ctx, pool):
    box = CapBall(center=SpherePoint(coords=[0.0, 0.0, 1.0]), radius=0.5).box()
    empirical = pool_box_mass(pool, box)
    exact = box_measure(box, None, ctx).value
    assert abs(empirical.value - exact) <= 4.0 * empirical.abs_error


def test_unlocated_pool_is_rejected(ctx, family):
    bare = build_pool(1_000, ctx, None, 3, shards=1)
    with pytest.raises(PreconditionViolation):
        OperatorService(ctx, family, bare)


def test_tree_sweeps(family):
    system = family.systems[0]
    ones = np.ones(system.size)
    subtree = aggregate_up(system, ones)
    chain = prefix_down(system, ones)
    assert np.array_equal(chain, system.level.astype(float))
    assert subtree[system.ids_at(1)].sum() == system.size


def test_gram_apply_matches_dense_definition(family):
    system = family.systems[0]
    rng = rng_stream(5, "gram-test")
    mu = rng.random(system.size)
    v = rng.random(system.size)
    lineage = [set(_ancestors(system, i)) for i in range(system.size)]
    rows = rng.choice(system.size, size=min(60, system.size), replace=False)
    expected = np.zeros(rows.size)
    for i, q in enumerate(rows):
        for r in range(system.size):
            if q in lineage[r]:
                expected[i] += mu[r] * v[r]
            elif r in lineage[q]:
                expected[i] += mu[q] * v[r]
    np.testing.assert_allclose(gram_apply(system, mu, v)[rows], expected, rtol=1e-10)


def _ancestors(system, cube):
    out = [cube]
    while system.parent[out[-1]] >= 0:
        out.append(int(system.parent[out[-1]]))
    return out


def test_T_of_one_is_one(operators, family):
    for t in range(family.N):
        bf = operators.apply_T(1.0, None, t)
        occupied = operators.box_measures(t, None, MeasureMode.POOL).alpha_mass > 0
        np.testing.assert_allclose(bf.coefficients[occupied], 1.0, rtol=1e-12)
        assert np.all(bf.coefficients[~occupied] == 0.0)


def test_T_preserves_positivity(operators):
    f = rng_stream(6, "positivity-test").random(operators.pool.size)
    assert np.all(operators.apply_T(f, None, 0).coefficients >= 0.0)


def test_T_matches_kernel_summation(ctx, operators, pool):
    weight = make_example_weight(0.4, ctx)
    f = np.cos(3.0 * pool.points[:, 0]) + 2.0
    x = pool.points[:25]
    swept = operators.evaluate(operators.apply_T(f, weight, 1), x)
    direct = operators.direct_T(f, weight, 1, x)
    np.testing.assert_allclose(swept, direct, rtol=1e-9, atol=1e-12)


def test_T_matches_kernel_summation_off_the_pool(ctx, operators, pool):
    weight = make_example_weight(0.4, ctx)
    f = 1.0 + pool.points[:, 1] ** 2
    x = random_ball_points(100, ctx.n, rng_stream(9, "fresh-points-test"))
    swept = operators.evaluate(operators.apply_T(f, weight, 0), x)
    np.testing.assert_allclose(swept, operators.direct_T(f, weight, 0, x), rtol=1e-9, atol=1e-12)


def test_evaluate_agrees_on_pool(operators, pool):
    bf = operators.apply_T(1.0, None, 0)
    np.testing.assert_allclose(operators.evaluate(bf, pool.points[:500]), operators.evaluate_on_pool(bf)[:500])


def test_wrong_length_values_raise(operators):
    with pytest.raises(PreconditionViolation):
        operators.apply_T(np.ones(3), None, 0)


def test_radial_mode_needs_radial_weight(operators):
    general = Weight(label="x_1 squared plus one", evaluator=lambda x: 1.0 + x[:, 0] ** 2)
    with pytest.raises(PreconditionViolation):
        operators.box_measures(0, general, MeasureMode.RADIAL)


def test_box_measures_do_not_mix_weights_sharing_a_label(operators):
    rising = Weight.power_weight(0.3, label="w")
    falling = Weight.power_weight(-0.3, label="w")
    first = operators.box_measures(0, rising).weight_mass
    second = operators.box_measures(0, falling).weight_mass
    assert not np.allclose(first, second)
    np.testing.assert_array_equal(operators.box_measures(0, Weight.power_weight(0.3)).weight_mass, first)


def test_kernel_symmetric_and_nonnegative(operators, pool):
    x, y = pool.points[:400], pool.points[400:800]
    forward = operators.kernel_sum_many(x, y)
    assert np.array_equal(forward, operators.kernel_sum_many(y, x))
    assert np.all(forward >= 0.0)
    assert operators.kernel_sum(x[0], y[0]) == forward[0]


def test_dyadic_maximal_of_one(operators, pool):
    for t in range(operators.family.N):
        values = operators.dyadic_maximal_on_pool(1.0, None, t)
        covered = pool.deepest[t] >= 0
        np.testing.assert_allclose(values[covered], 1.0, rtol=1e-12)
        assert np.all(values[~covered] == 0.0)


def test_dyadic_maximal_dominates_values_on_leaf_boxes(operators):
    f = rng_stream(8, "maximal-test").random(operators.pool.size)
    values = operators.dyadic_maximal_on_pool(f, None, 0)
    assert np.all(values >= 0.0)
    assert values.max() <= f.max() + 1e-12


def test_dyadic_maximal_at_points_matches_pool(ctx, operators, pool):
    weight = make_example_weight(0.2, ctx)
    f = 1.0 + pool.points[:, 2] ** 2
    on_pool = operators.dyadic_maximal_on_pool(f, weight, 1)
    at_points = operators.apply_dyadic_maximal(f, weight, 1, pool.points[:300])
    np.testing.assert_allclose(at_points, on_pool[:300])


def test_global_maximal_of_one(ctx, cap_grid):
    small = build_pool(2_000, ctx, None, 3, shards=2)
    x = small.points[:50]
    np.testing.assert_allclose(apply_global_maximal(np.ones(small.size), cap_grid, small, x), 1.0)


def test_witness_below_power_iteration(ctx, operators, tiny_config):
    weight = make_example_weight(0.2, ctx)
    report = operators.operator_norm(weight, 0, tol=tiny_config.power_tol, max_iter=tiny_config.power_max_iter,
                                     dense_limit=tiny_config.dense_limit)
    assert report.lower_bound > 0.0
    assert report.lower_bound <= report.power_iter_estimate * (1.0 + 1e-9)
    assert report.mode == MeasureMode.RADIAL
    if report.dense_oracle is not None and report.converged:
        assert report.dense_oracle == pytest.approx(report.power_iter_estimate, rel=1e-6)


def test_strict_norm_raises_without_convergence(ctx, operators):
    weight = make_example_weight(0.2, ctx)
    with pytest.raises(NonConvergence) as info:
        operators.operator_norm(weight, 0, tol=0.0, max_iter=2, strict=True)
    assert info.value.iterations == 2
    relaxed = operators.operator_norm(weight, 0, tol=0.0, max_iter=2)
    assert not relaxed.converged
    assert relaxed.residual == pytest.approx(info.value.residual)


def test_domination_scan(operators):
    report = operators.domination_scan(300, 7)
    floor, ceiling = operators.resolution_window()
    assert report.floor == floor and report.ceiling == ceiling
    assert report.zero_kernel <= report.pairs
    if report.zero_kernel:
        assert report.max_ratio == float("inf")
    elif report.pairs:
        assert 0.0 < report.median_ratio <= report.max_ratio


def test_operators_suite_runs(tiny_config, bench):
    report = verify_operators(tiny_config, bench)
    assert report.status != SuiteStatus.ERROR
    by_name = {c.name: c for c in report.checks}
    assert by_name["kernel symmetric"].passed
    assert by_name["kernel nonnegative"].passed
    assert by_name["S(0) = 0"].passed
    assert by_name["S(1) = 1 for omega = 1"].passed
    for t in range(bench.family.N):
        assert by_name[f"box sweep equals kernel summation, system {t}"].passed
    assert len(report.tables["domination"]) == 2


def _scan(seed, zero_kernel=0, max_ratio=3.0):
    return DominationReport(seed=seed, pairs=100, floor=0.01, ceiling=0.5, zero_kernel=zero_kernel,
                            max_ratio=max_ratio, median_ratio=min(max_ratio, 1.5))


def test_domination_holds_for_stable_scans():
    report = SuiteReport(suite="operators", claim="")
    domination_checks(report, _scan(7, max_ratio=3.0), _scan(8, max_ratio=4.5))
    assert report.status == SuiteStatus.PASSED
    assert report.checks[-1].value == pytest.approx(1.5)
    assert len(report.tables["domination"]) == 2


def test_pairs_without_common_box_fail_domination():
    report = SuiteReport(suite="operators", claim="")
    domination_checks(report, _scan(7, zero_kernel=99, max_ratio=float("inf")), _scan(8))
    by_name = {c.name: c for c in report.checks}
    assert not by_name["size majorant dominated in the resolution window, seed 7"].passed
    assert by_name["size majorant dominated in the resolution window, seed 8"].passed
    assert not by_name["domination constant stable across seeds"].passed
    assert report.status == SuiteStatus.FAILED


def test_domination_constant_drifting_between_seeds_fails():
    report = SuiteReport(suite="operators", claim="")
    domination_checks(report, _scan(7, max_ratio=2.0), _scan(8, max_ratio=6.0))
    by_name = {c.name: c for c in report.checks}
    assert by_name["size majorant dominated in the resolution window, seed 7"].passed
    assert not by_name["domination constant stable across seeds"].passed
    assert by_name["domination constant stable across seeds"].value == pytest.approx(3.0)


def test_norm_ratio_spread_is_bounded():
    report = SuiteReport(suite="operators", claim="")
    norm_ratio_check(report, [{"norm_over_bb": r} for r in (0.8, 1.0, 1.9)])
    assert report.checks[0].passed and report.checks[0].flagged

    report = SuiteReport(suite="operators", claim="")
    norm_ratio_check(report, [{"norm_over_bb": r} for r in (0.1, 1.0, 2.5)])
    assert not report.checks[0].passed
    assert report.checks[0].value == pytest.approx(25.0)
