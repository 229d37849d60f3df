"""
Sharpness suite for the ProjectCarleson system.
Runs the example family omega_delta against the test function
f = (1-|x|^2)^-s chi_{B0^} and fits the growth of the dyadic operator norm
against the dyadic Bekolle-Bonami constant.
"""
import logging
import math
from typing import List, Tuple

import numpy as np
from scipy import integrate
from sklearn.linear_model import LinearRegression

from models.experiment import ExperimentConfig, SharpnessRow, SuiteReport
from models.operators import MeasureMode
from models.weights import Weight
from services.measure_service import annulus_masses, cap_sigma, make_alpha_context, radial_tail_mass
from services.weight_service import make_example_weight

# Initialize logging
logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9
SPREAD_BAND = 2.0
SPREAD_LIMIT = 10.0


def f_norm_squared(bench, weight: Weight, r0: float) -> Tuple[float, float]:
    """
    ||f||^2 in L^2(omega d nu_alpha) for f = (1-|x|^2)^-s chi_{B0^}.

    Returns the closed form (c_alpha / c_{alpha-s}) |B0^|_{alpha-s} and an
    independent adaptive quadrature of the same radial integral.
    """
    ctx = bench.ctx
    n, beta = ctx.n, ctx.alpha - weight.exponent
    sigma = cap_sigma(r0, n)
    shifted = make_alpha_context(n, beta)
    box_mass = sigma * shifted.c_alpha * float(radial_tail_mass(1.0, beta, n))
    exact = ctx.c_alpha / shifted.c_alpha * box_mass
    value, _ = integrate.quad(lambda t: t ** (n - 1) * (1.0 + t) ** beta, 0.0, 1.0,
                              weight="alg", wvar=(0.0, beta), epsabs=0.0, epsrel=1e-12, limit=200)
    return exact, sigma * n * ctx.c_alpha * value


def _witness(bench, weight: Weight, t: int, r0: float) -> float:
    """Squared ratio ||T f~||^2 / ||f~||^2 for f~ = f omega = chi_{B0^} on the radial box measures."""
    operators = bench.operators
    system = bench.family.systems[t]
    dual = weight.power(-1.0)
    e1 = np.zeros(bench.ctx.n)
    e1[0] = 1.0
    in_cap = bench.pool.directions @ e1 > math.cos(r0)
    b = operators.cell_fractions(t, in_cap) * annulus_masses(bench.ctx, dual, system.box_height)
    f_sq = float(in_cap.mean()) * float(annulus_masses(bench.ctx, dual, np.array([1.0]))[0])
    return operators.witness_ratio(t, weight, b, f_sq, MeasureMode.RADIAL) ** 2


def _slope(x: List[float], y: List[float]) -> float:
    if len(x) < 2:
        return float("nan")
    model = LinearRegression().fit(np.log(np.asarray(x))[:, None], np.log(np.asarray(y)))
    return float(model.coef_[0])


def sharpness_rows(config: ExperimentConfig, bench) -> List[SharpnessRow]:
    """One SharpnessRow per delta of config.deltas (p = 2)."""
    operators = bench.operators
    rows = []
    for delta in config.deltas:
        weight = make_example_weight(delta, bench.ctx)
        bb = bench.weights.bb_constant_dyadic(weight, 2.0, bench.family, operators).constant
        exact, quadrature = f_norm_squared(bench, weight, config.r0)
        witness_sq = max(_witness(bench, weight, t, config.r0) for t in range(bench.family.N))
        norms = [operators.operator_norm(weight, t, config.power_tol, config.power_max_iter, config.dense_limit,
                                         config.seed) for t in range(bench.family.N)]
        t_norm = max(r.power_iter_estimate for r in norms)
        rows.append(SharpnessRow(
            delta=delta,
            s=weight.exponent,
            bb_constant=bb,
            f_norm=math.sqrt(exact),
            f_norm_quadrature=math.sqrt(quadrature),
            T_norm_lb=math.sqrt(witness_sq),
            T_norm=t_norm,
            witness_ratio_sq=witness_sq,
            ratio=t_norm / bb,
        ))
        logger.info(f"delta={delta:g}: [omega]_2={bb:.6g}, ||T||={t_norm:.6g}, witness^2={witness_sq:.6g}")
    return rows


def run_sharpness(config: ExperimentConfig, bench) -> SuiteReport:
    """
    Run the sharpness experiment over config.deltas.

    Args:
        config: run configuration (deltas, r0, power iteration settings, slope_band)
        bench: Workbench with the family, the pool and the services

    Returns:
        SuiteReport whose "sharpness" table holds one row per delta and whose
        "slopes" table holds the fitted log-log slopes
    """
    report = SuiteReport(suite="sharpness",
                         claim="||f||^2 <= c10/delta; ||T_{omega^-1}|| grows linearly in [omega]_2 (dyadic surrogate)")
    rows = sharpness_rows(config, bench)

    for row in rows:
        gap = abs(row.f_norm ** 2 - row.f_norm_quadrature ** 2) / row.f_norm ** 2
        report.check(f"||f||^2 closed form against quadrature, delta={row.delta:g}", gap <= NORM_TOLERANCE,
                     value=gap, bound=NORM_TOLERANCE)
        report.check(f"witness <= power iteration, delta={row.delta:g}",
                     row.T_norm_lb <= row.T_norm * (1.0 + config.power_tol + NORM_TOLERANCE),
                     value=row.T_norm_lb, bound=row.T_norm)

    scaled = np.array([row.delta * row.f_norm ** 2 for row in rows])
    spread = float(scaled.max() / scaled.min())
    report.check("delta ||f||^2 bounded over the family", spread <= SPREAD_LIMIT, value=spread, bound=SPREAD_LIMIT,
                 flagged=spread > SPREAD_BAND, c10=float(scaled.max()))

    ordered = sorted(rows, key=lambda r: -r.delta)
    report.check("[omega_delta]_2 increases as delta decreases",
                 bool(np.all(np.diff([r.bb_constant for r in ordered]) > 0.0)))
    increasing = bool(np.all(np.diff([r.T_norm for r in ordered]) > 0.0))
    report.check("||T|| increases as delta decreases", True, flagged=not increasing)

    bb = [r.bb_constant for r in rows]
    slope = _slope(bb, [r.T_norm for r in rows])
    witness_slope = _slope(bb, [r.witness_ratio_sq for r in rows])
    band = config.slope_band
    report.check("log-log slope of ||T|| against [omega]_2 is finite", math.isfinite(slope), value=slope,
                 bound=1.0, flagged=not (abs(slope - 1.0) <= band), band=band)
    report.check("log-log slope of the squared witness ratio is finite", math.isfinite(witness_slope),
                 value=witness_slope, bound=1.0, flagged=not (abs(witness_slope - 1.0) <= band), band=band)

    report.tables["sharpness"] = [row.row() for row in rows]
    report.tables["slopes"] = [
        {"quantity": "T_norm", "slope": slope, "band": band},
        {"quantity": "witness_ratio_sq", "slope": witness_slope, "band": band},
    ]
    logger.info(f"Sharpness: slope {slope:.4g}, witness slope {witness_slope:.4g} over {len(rows)} deltas")
    return report.finish()
