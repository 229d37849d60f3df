"""
Operators suite for the ProjectCarleson system.
The sample pool, the positive dyadic operator and its kernel, the dyadic and
global maximal functions, Rubio de Francia iteration, domination of the size
majorant and power-iteration norms against the dense oracle.
"""
import logging
import math

import numpy as np

from models.dyadic import AdjacentFamily
from models.experiment import ExperimentConfig, SuiteReport
from models.geometry import CapBall, SpherePoint
from models.operators import CapGrid, DominationReport, MeasureMode
from models.weights import Weight
from services.geometry_service import box_contains, random_ball_points, rng_stream
from services.measure_service import box_measure
from services.operator_service import (
    OperatorService,
    build_pool,
    global_maximal_on_pool,
    grid_membership,
    pool_box_mass,
)
from services.weight_service import make_example_weight

# Initialize logging
logger = logging.getLogger(__name__)

EXACT = 1e-12
RATIO_SLACK = 1e-9
MAXIMAL_BAND = 4.0
SPREAD_LIMIT = 10.0
SPREAD_BAND = 2.0
DOMINATION_SPREAD = 2.0
CHAIN_POINTS = 100
KERNEL_PAIRS = 1_000
OPERATOR_POOL = 200_000
RDF_DELTA = 0.2


def _e1(n: int) -> np.ndarray:
    e1 = np.zeros(n)
    e1[0] = 1.0
    return e1


def _pool_checks(report: SuiteReport, bench):
    pool = bench.pool
    report.check("pool inside B_n", bool(np.all(pool.modulus < 1.0)), value=float(pool.modulus.max()), bound=1.0)
    box = CapBall(center=SpherePoint(coords=_e1(bench.ctx.n)), radius=0.5).box()
    empirical = pool_box_mass(pool, box)
    exact = box_measure(box, None, bench.ctx)
    deviation = abs(empirical.value - exact.value) / empirical.abs_error
    report.check("held-out cap box within 3 SE", deviation <= 3.0, value=deviation, bound=3.0)


def _operator_checks(report: SuiteReport, config: ExperimentConfig, bench):
    operators = bench.operators
    pool = bench.pool
    weight = make_example_weight(0.5, bench.ctx)
    for t, system in enumerate(bench.family.systems):
        occupancy = operators.occupancy(t)
        occupied = occupancy > 0

        ones = operators.apply_T(1.0, None, t)
        report.check(f"T 1 = 1 on every occupied cube, system {t}",
                     np.abs(ones.coefficients[occupied] - 1.0).max() <= EXACT,
                     value=float(np.abs(ones.coefficients[occupied] - 1.0).max()), unreliable=ones.unreliable)

        level2 = system.ids_at(2) if system.depth > 1 else system.ids_at(1)
        q0 = int(level2[np.argmax(occupancy[level2])])
        k0 = int(system.level[q0])
        deepest = pool.deepest[t]
        chain_depth = np.where(deepest >= 0, system.level[np.maximum(deepest, 0)], 0)
        ancestor = system.leaf_ancestors[pool.leaves[t] - system.level_offsets[system.depth - 1], k0 - 1]
        inside = (chain_depth >= k0) & (ancestor == q0)
        indicator = operators.apply_T(inside.astype(float), None, t)
        mass = operators.box_measures(t, None, MeasureMode.POOL).alpha_mass
        ancestors = []
        r = int(system.parent[q0])
        while r >= 0:
            ancestors.append(r)
            r = int(system.parent[r])
        expected = mass[q0] / mass[ancestors] if ancestors else np.array([])
        error = max([abs(indicator.coefficients[q0] - 1.0)]
                    + list(np.abs(indicator.coefficients[ancestors] - expected)))
        report.check(f"T chi_Q0 on Q0 and its ancestors, system {t}", error <= EXACT, value=error, cube=q0)

        rng = rng_stream(config.seed, f"operator-functions-{t}")
        f = rng.random(pool.size)
        applied = operators.apply_T(f, weight, t)
        report.check(f"T preserves positivity, system {t}", bool(np.all(applied.coefficients >= 0.0)))

        points = random_ball_points(CHAIN_POINTS, bench.ctx.n, rng)
        via_boxes = operators.evaluate(applied, points)
        via_kernel = operators.direct_T(f, weight, t, points)
        scale = max(float(np.abs(via_kernel).max()), 1.0)
        mismatch = float(np.abs(via_boxes - via_kernel).max()) / scale
        report.check(f"box sweep equals kernel summation, system {t}", mismatch <= EXACT, value=mismatch)

        maximal_one = operators.dyadic_maximal_on_pool(1.0, None, t)
        covered = pool.deepest[t] >= 0
        report.check(f"M 1 = 1 on covered points, system {t}",
                     np.abs(maximal_one[covered] - 1.0).max() <= EXACT)
        maximal_q0 = operators.dyadic_maximal_on_pool(inside.astype(float), None, t)
        report.check(f"M chi_Q0 = 1 on Q0^, system {t}", np.abs(maximal_q0[inside] - 1.0).max(initial=0.0) <= EXACT)

        worst = 0.0
        unit = np.ones(pool.size)
        weighted = weight.evaluate_on(pool.modulus, pool.one_minus_sq, pool.points)
        for _ in range(config.maximal_trials):
            g = rng.random(pool.size) ** 4 + 0.01
            for w, wv in ((None, unit), (weight, weighted)):
                numerator = float(np.mean(operators.dyadic_maximal_on_pool(g, w, t) ** 2 * wv))
                worst = max(worst, math.sqrt(numerator / float(np.mean(g ** 2 * wv))))
        report.check(f"dyadic maximal L2 constant, system {t}", worst <= MAXIMAL_BAND, value=worst,
                     bound=MAXIMAL_BAND)


def _kernel_checks(report: SuiteReport, config: ExperimentConfig, bench):
    operators = bench.operators
    n = bench.ctx.n
    rng = rng_stream(config.seed, "kernel-pairs")
    x = random_ball_points(KERNEL_PAIRS, n, rng)
    y = random_ball_points(KERNEL_PAIRS, n, rng)
    forward = operators.kernel_sum_many(x, y)
    backward = operators.kernel_sum_many(y, x)
    report.check("kernel symmetric", bool(np.array_equal(forward, backward)))
    report.check("kernel nonnegative", bool(np.all(forward >= 0.0)))

    e1 = _e1(n)
    far = operators.kernel_sum(0.999 * e1, -0.999 * e1)
    report.check("antipodal boundary points share no box", far == 0.0, value=far)

    # brute force over every cube of system 0
    system = bench.family.systems[0]
    mass = operators.box_measures(0, None, MeasureMode.POOL).alpha_mass
    point = 0.995 * e1
    brute = 0.0
    for cube_id in range(system.size):
        if mass[cube_id] > 0 and box_contains(system.cube(cube_id).box(), point[None, :])[0]:
            brute += 1.0 / mass[cube_id]
    chain = operators.kernel_sum_many(point[None, :], point[None, :], systems=[0])[0]
    report.check("kernel chain equals brute-force cube sum", abs(chain - brute) <= EXACT * max(brute, 1.0),
                 value=chain, bound=brute)

    first = operators.domination_scan(config.domination_pairs, config.seed)
    second = operators.domination_scan(config.domination_pairs, config.seed + 1)
    domination_checks(report, first, second)


def domination_checks(report: SuiteReport, first: DominationReport, second: DominationReport):
    """A pair with no common box fails domination; the max ratio must agree across seeds within a factor 2."""
    for scan in (first, second):
        report.check(f"size majorant dominated in the resolution window, seed {scan.seed}",
                     scan.pairs > 0 and scan.zero_kernel == 0 and math.isfinite(scan.max_ratio),
                     value=scan.max_ratio, zero_kernel=scan.zero_kernel, pairs=scan.pairs)
    ratios = [first.max_ratio, second.max_ratio]
    stable = all(math.isfinite(r) and r > 0.0 for r in ratios)
    spread = max(ratios) / min(ratios) if stable else float("inf")
    report.check("domination constant stable across seeds", stable and spread <= DOMINATION_SPREAD,
                 value=spread, bound=DOMINATION_SPREAD, seeds=[first.seed, second.seed])
    report.tables["domination"] = [first.to_dict(), second.to_dict()]


def _global_maximal_checks(report: SuiteReport, config: ExperimentConfig, bench):
    n = bench.ctx.n
    sample = bench.extrapolation.pool
    grid = bench.cap_grid
    grid = CapGrid(centers=np.vstack([grid.centers, _e1(n)]), radii=np.append(grid.radii, 1.0),
                   description=grid.description + " + B_0")
    rng = rng_stream(config.seed, "global-maximal")
    x = random_ball_points(500, n, rng)
    on_pool = grid_membership(grid, sample.points)
    at_x = grid_membership(grid, x)
    ones = global_maximal_on_pool(np.ones(sample.size), on_pool, at_x)
    covered = at_x[on_pool.any(axis=1)].any(axis=0)
    report.check("M_alpha 1 = 1", np.abs(ones[covered] - 1.0).max(initial=0.0) <= EXACT,
                 points=int(covered.sum()))
    # the appended B_0 box is the last grid row
    chi = on_pool[-1].astype(float)
    inside = at_x[-1]
    if inside.any() and on_pool[-1].any():
        values = global_maximal_on_pool(chi, on_pool, at_x[:, inside])
        report.check("M_alpha chi_B0 = 1 on B0^", np.abs(values - 1.0).max() <= EXACT, value=float(values.min()))


def _extrapolation_checks(report: SuiteReport, config: ExperimentConfig, bench):
    service = bench.extrapolation
    p = config.rdf_p
    zero = service.rdf_S(np.zeros(service.pool.size), Weight.unit(), p)
    report.check("S(0) = 0", bool(np.all(zero == 0.0)))
    one = service.rdf_S(np.ones(service.pool.size), Weight.unit(), p)
    report.check("S(1) = 1 for omega = 1", np.abs(one - 1.0).max() <= EXACT)

    for weight in (Weight.unit(), make_example_weight(RDF_DELTA, bench.ctx)):
        result = service.check(weight, p, config.rdf_trials, config.rdf_depth, config.seed)
        report.check(f"h <= D(h), {weight.label}", result.min_gap_I >= 0.0, value=result.min_gap_I, bound=0.0)
        report.check(f"||D(h)|| <= (2 - 2^-KD) ||h||, {weight.label}",
                     result.max_norm_ratio_II <= result.bound_II * (1.0 + RATIO_SLACK),
                     value=result.max_norm_ratio_II, bound=result.bound_II)
        report.check(f"box product bound for S, {weight.label}", result.max_product_ratio <= 1.0 + RATIO_SLACK,
                     value=result.max_product_ratio, bound=1.0)
        report.check(f"[D(h) omega]_2 <= 2A [omega]_p^(1/(p-1)), {weight.label}",
                     result.max_ratio_III <= 1.0 + RATIO_SLACK, value=result.max_bb_III, bound=result.bound_III,
                     A=result.A, truncation_factor=result.truncation_factor)
        report.tables.setdefault("extrapolation", []).append(result.to_dict())

    weights = [make_example_weight(d, bench.ctx) for d in config.deltas]
    rows = service.maximal_growth(weights, p, config.maximal_trials)
    ratios = np.array([r.ratio for r in rows])
    spread = float(ratios.max() / ratios.min())
    report.check("||M_alpha|| / [omega]_p^(1/(p-1)) bounded over the family",
                 bool(np.all(np.isfinite(ratios))) and spread <= SPREAD_LIMIT, value=spread, bound=SPREAD_LIMIT)
    duality = max(r.duality_error for r in rows)
    report.check("[omega^(1-p')]_p' = [omega]_p^(1/(p-1)) on the grid", duality <= RATIO_SLACK, value=duality,
                 bound=RATIO_SLACK)
    report.tables["maximal_growth"] = [r.row() for r in rows]


def _norm_checks(report: SuiteReport, config: ExperimentConfig, bench):
    """Power iteration against the dense oracle on a shallow system."""
    system = bench.dyadic_service.build_system(config.n, config.eta, config.operator_depth, config.seed)
    family = AdjacentFamily(systems=[system])
    pool = build_pool(min(config.pool, OPERATOR_POOL), bench.ctx, family, config.seed, shards=config.shards,
                      threads=bench.threads, stream="operator-pool")
    operators = OperatorService(bench.ctx, family, pool, config.min_occupancy)
    rows = []
    for delta in config.deltas:
        weight = make_example_weight(delta, bench.ctx)
        norm = operators.operator_norm(weight, 0, config.power_tol, config.power_max_iter, config.dense_limit,
                                       config.seed)
        bb = bench.weights.bb_constant_dyadic(weight, 2.0, family, operators).constant
        report.check(f"witness <= power iteration, delta={delta:g}",
                     norm.lower_bound <= norm.power_iter_estimate * (1.0 + norm.residual + RATIO_SLACK),
                     value=norm.lower_bound, bound=norm.power_iter_estimate)
        report.check(f"power iteration converged, delta={delta:g}", True, value=norm.residual,
                     flagged=not norm.converged, iterations=norm.iterations)
        if norm.dense_oracle is not None:
            gap = abs(norm.power_iter_estimate - norm.dense_oracle) / norm.dense_oracle
            report.check(f"power iteration matches dense oracle, delta={delta:g}", gap <= 1e-6 or not norm.converged,
                         value=gap, bound=1e-6, flagged=not norm.converged)
            report.check(f"dense reduction symmetric, delta={delta:g}", norm.symmetry_error <= EXACT,
                         value=norm.symmetry_error, bound=EXACT)
        row = norm.row()
        row.update({"delta": delta, "bb_dyadic": bb, "norm_over_bb": norm.power_iter_estimate / bb})
        rows.append(row)
    norm_ratio_check(report, rows)
    report.tables["operator_norms"] = rows


def norm_ratio_check(report: SuiteReport, rows):
    """||T|| / [omega]_2 may vary by at most SPREAD_LIMIT over the family; above SPREAD_BAND it is flagged."""
    ratios = np.array([r["norm_over_bb"] for r in rows], dtype=float)
    finite = bool(ratios.size and np.all(np.isfinite(ratios)) and ratios.min() > 0.0)
    spread = float(ratios.max() / ratios.min()) if finite else float("inf")
    report.check("||T|| / [omega]_2 bounded over the family", finite and spread <= SPREAD_LIMIT,
                 value=spread, bound=SPREAD_LIMIT, flagged=spread > SPREAD_BAND,
                 largest=float(ratios.max(initial=0.0)))


def verify_operators(config: ExperimentConfig, bench) -> SuiteReport:
    """
    Run the operator suites.

    Args:
        config: run configuration
        bench: Workbench with the family, the pools and the services

    Returns:
        SuiteReport with pool, operator, kernel, maximal, extrapolation and norm checks
    """
    report = SuiteReport(suite="operators",
                         claim="||T_{omega^-1}|| <= C [omega]_2; R_alpha dominated by the dyadic kernels; ||M_alpha|| <= C [omega]_p^(1/(p-1)); Rubio de Francia")
    logger.info(f"Operator checks on {bench.family.N} systems and a pool of {config.pool} points")
    _pool_checks(report, bench)
    _operator_checks(report, config, bench)
    _kernel_checks(report, config, bench)
    _global_maximal_checks(report, config, bench)
    _extrapolation_checks(report, config, bench)
    _norm_checks(report, config, bench)
    return report.finish()
