"""
Weights suite for the ProjectCarleson system.
Bekolle-Bonami constants of the example family over cap boxes and over
dyadic cubes: the 1/delta growth, duality, scaling and dyadic/ball equivalence.
"""
import logging

import numpy as np

from models.experiment import ExperimentConfig, SuiteReport
from models.weights import Weight
from services.weight_service import dual_exponent, dual_weight

# Initialize logging
logger = logging.getLogger(__name__)

DUALITY_TOLERANCE = 1e-9
SPREAD_BAND = 2.0
SPREAD_LIMIT = 10.0
ORACLE_SLACK = 1e-3
SCALE = 3.7


def verify_weights(config: ExperimentConfig, bench) -> SuiteReport:
    """
    Run the weight suites across config.weight_deltas.

    Args:
        config: run configuration
        bench: Workbench with the family, the pool and the weight service

    Returns:
        SuiteReport with the fitted c3, the equivalence ratios and per-delta rows
    """
    report = SuiteReport(suite="weights",
                         claim="[omega_delta]_2 <= c3/delta; dyadic and ball constants equivalent; duality of constants")
    p = config.p
    service = bench.weights
    operators = bench.operators
    family = bench.family

    unit = Weight.unit()
    unit_balls = service.bb_constant_balls(unit, p)
    unit_dyadic = service.bb_constant_dyadic(unit, p, family, operators)
    report.check("omega = 1 has constant 1 over balls", abs(unit_balls.constant - 1.0) <= 1e-12, value=unit_balls.constant)
    report.check("omega = 1 has constant 1 over cubes", abs(unit_dyadic.constant - 1.0) <= 1e-12, value=unit_dyadic.constant)

    rows = service.family_rows(config.weight_deltas, p, family, operators)
    oracle_radii = np.logspace(-4, 0, config.oracle_radii)
    for row, weight in zip(rows, service.example_family(config.weight_deltas)):
        profile = service.bb_radial_profile(weight, p, service.radii)
        report.check(f"[omega]_p >= 1 on every searched ball, delta={weight.delta:g}",
                     bool(np.all(profile >= 1.0 - 1e-12)), value=float(profile.min()), bound=1.0)

        oracle = float(service.bb_radial_profile(weight, p, oracle_radii).max())
        row["oracle"] = oracle
        report.check(f"grid maximum within the radial oracle, delta={weight.delta:g}",
                     row["bb_balls"] <= oracle * (1.0 + ORACLE_SLACK), value=row["bb_balls"], bound=oracle)

        dual = service.bb_constant_dyadic(dual_weight(weight, p, bench.ctx), dual_exponent(p), family, operators)
        expected = row["bb_dyadic"] ** (1.0 / (p - 1.0))
        row["dual_bb_dyadic"] = dual.constant
        residual = abs(dual.constant - expected) / expected
        report.check(f"duality of dyadic constants, delta={weight.delta:g}", residual <= DUALITY_TOLERANCE,
                     value=residual, bound=DUALITY_TOLERANCE)

        scaled = service.bb_constant_balls(weight.scaled(SCALE), p).constant
        report.check(f"[c omega] = [omega], delta={weight.delta:g}",
                     abs(scaled - row["bb_balls"]) <= DUALITY_TOLERANCE * row["bb_balls"], value=scaled, bound=row["bb_balls"])

        if p == 2.0:
            report.check(f"explicit bound (C2/(C1(alpha+1)))^2/delta, delta={weight.delta:g}", True,
                         value=row["bb_balls"], bound=row["explicit_bound"],
                         flagged=row["bb_balls"] > row["explicit_bound"])

    scaled_values = np.array([r["delta_bb_balls"] for r in rows])
    spread = float(scaled_values.max() / scaled_values.min())
    c3 = float(scaled_values.max())
    report.check("delta [omega_delta] bounded over the family", spread <= SPREAD_LIMIT, value=spread,
                 bound=SPREAD_LIMIT, flagged=spread > SPREAD_BAND, c3=c3)

    dyadic = [r["bb_dyadic"] for r in sorted(rows, key=lambda r: -r["delta"])]
    report.check("dyadic constant increases as delta decreases", bool(np.all(np.diff(dyadic) > 0.0)))

    equivalence_checks(report, rows)

    report.tables["weights"] = rows
    report.tables["bb_reports"] = [unit_balls.row(), unit_dyadic.row()]
    logger.info(f"Weights suite: c3={c3:.4g}, spread={spread:.3g}")
    return report.finish()


def equivalence_checks(report: SuiteReport, rows):
    """Ball and dyadic constants stay comparable: each ratio varies by at most SPREAD_LIMIT over the family."""
    for key in ("dyadic_over_balls", "balls_over_dyadic"):
        ratios = np.array([r[key] for r in rows], dtype=float)
        finite = bool(ratios.size and np.all(np.isfinite(ratios)) and ratios.min() > 0.0)
        spread = float(ratios.max() / ratios.min()) if finite else float("inf")
        report.check(f"{key} bounded over the family", finite and spread <= SPREAD_LIMIT, value=spread,
                     bound=SPREAD_LIMIT, flagged=spread > SPREAD_BAND, largest=float(ratios.max(initial=0.0)))
