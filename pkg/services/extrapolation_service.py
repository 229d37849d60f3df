"""
Extrapolation Service for the ProjectCarleson system.
Rubio de Francia iteration for the weighted L^p bound: the operator S built
from the global maximal function, its truncated series D, and the growth of
the maximal function on the example weights.

Everything lives on a small sample pool and a cap grid; averages are pool
averages over grid boxes and M_alpha is the grid maximal function, so the
box-wise inequalities below hold exactly for the empirical measure.
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from models.errors import DivisionByZeroWeight, PreconditionViolation
from models.measure import AlphaContext
from models.operators import CapGrid, ExtrapolationReport, MaximalGrowthRow, SamplePool
from models.weights import Weight
from .geometry_service import rng_stream
from .operator_service import global_maximal_on_pool, grid_averages, grid_membership
from .weight_service import dual_exponent, dual_weight

# Initialize logging
logger = logging.getLogger(__name__)


def phi(p: float) -> float:
    """phi(p) = (p-2)/(p-1)."""
    if p <= 2.0:
        raise PreconditionViolation(f"the extrapolation step needs p > 2, got {p}")
    return (p - 2.0) / (p - 1.0)


def rdf_exponent(p: float) -> float:
    """p'/phi(p) = p/(p-2), the exponent of the space D acts on."""
    return dual_exponent(p) / phi(p)


class ExtrapolationService:
    """
    Service for the Rubio de Francia construction on a pool and a cap grid.
    The grid must cover every pool point (include the whole-ball box).
    """

    def __init__(self, ctx: AlphaContext, pool: SamplePool, grid: CapGrid):
        """Initialize the Extrapolation Service."""
        logger.info("Initializing Extrapolation Service")
        self.ctx = ctx
        self.pool = pool
        self.grid = grid
        self.membership = grid_membership(grid, pool.points)
        self.counts = self.membership.sum(axis=1)
        if not np.all(self.membership.any(axis=0)):
            raise PreconditionViolation("the cap grid leaves pool points uncovered; include the whole-ball box")

    def weight_values(self, weight: Weight) -> np.ndarray:
        return weight.evaluate_on(self.pool.modulus, self.pool.one_minus_sq, self.pool.points)

    def averages(self, values: np.ndarray) -> np.ndarray:
        return grid_averages(values, self.membership)

    def maximal(self, values: np.ndarray) -> np.ndarray:
        """M_alpha |f| at the pool points."""
        return global_maximal_on_pool(values, self.membership)

    def norm(self, h: np.ndarray, w: np.ndarray, q: float) -> float:
        """||h||_{L^q(omega d nu_alpha)} under the pool measure."""
        return float(np.mean(np.abs(h) ** q * w)) ** (1.0 / q)

    def box_bb(self, w: np.ndarray, p: float) -> np.ndarray:
        """Per grid box (omega-average)(omega^(1-p')-average)^(p-1); nan on empty boxes."""
        sigma = w ** (1.0 - dual_exponent(p))
        values = self.averages(w) * self.averages(sigma) ** (p - 1.0)
        return np.where(self.counts > 0, values, np.nan)

    def rdf_S(self, h: np.ndarray, weight: Weight, p: float, w: Optional[np.ndarray] = None) -> np.ndarray:
        """
        S(h) = (M_alpha(|h|^(1/phi) omega) / omega)^phi at the pool points.

        Raises:
            DivisionByZeroWeight: if omega vanishes at a pool point
        """
        f = phi(p)
        w = self.weight_values(weight) if w is None else w
        if np.any(w <= 0.0):
            raise DivisionByZeroWeight(f"{weight.label} vanishes at {int(np.sum(w <= 0.0))} pool points")
        return (self.maximal(np.abs(h) ** (1.0 / f) * w) / w) ** f

    def iterates(self, h: np.ndarray, weight: Weight, p: float, depth: int,
                 w: Optional[np.ndarray] = None) -> List[np.ndarray]:
        """[h, S h, ..., S^depth h]."""
        w = self.weight_values(weight) if w is None else w
        chain = [np.abs(np.asarray(h, dtype=float))]
        for _ in range(depth):
            chain.append(self.rdf_S(chain[-1], weight, p, w))
        return chain

    def chain_bound(self, chain: Sequence[np.ndarray], w: np.ndarray, p: float) -> float:
        """Largest step ratio ||S^k h|| / ||S^(k-1) h|| along one chain of iterates."""
        q = rdf_exponent(p)
        norms = [self.norm(g, w, q) for g in chain]
        ratios = [b / a for a, b in zip(norms[:-1], norms[1:]) if a > 0.0]
        return max(ratios, default=0.0)

    @staticmethod
    def series(chain: Sequence[np.ndarray], A: float, depth: int) -> np.ndarray:
        """Truncated sum_{k<=depth} S^k h / (2A)^k from precomputed iterates."""
        if depth < 0:
            raise PreconditionViolation(f"truncation depth must be nonnegative, got {depth}")
        if depth > 0 and A <= 0.0:
            raise PreconditionViolation(f"A must be positive, got {A}")
        total = np.array(chain[0], dtype=float)
        for k in range(1, depth + 1):
            total = total + chain[k] / (2.0 * A) ** k
        return total

    def rdf_D(self, h: np.ndarray, weight: Weight, p: float, A: float, depth: int) -> np.ndarray:
        """D(h) truncated after depth terms; depth 0 returns h."""
        return self.series(self.iterates(h, weight, p, depth), A, depth)

    def test_functions(self, trials: int, seed: int, boxes: int = 3) -> List[np.ndarray]:
        """Positive pool functions: a floor plus random multiples of a few grid-box indicators."""
        rng = rng_stream(seed, "rdf-test-functions")
        nonempty = np.flatnonzero(self.counts > 0)
        functions = []
        for _ in range(trials):
            picked = rng.choice(nonempty, size=min(boxes, nonempty.size), replace=False)
            h = np.full(self.pool.size, 0.1)
            for g, c in zip(picked, rng.uniform(0.5, 10.0, size=picked.size)):
                h = h + c * self.membership[g]
            functions.append(h)
        return functions

    def check(self, weight: Weight, p: float, trials: int, depth: int, seed: int) -> ExtrapolationReport:
        """
        Realize the three properties of D for one weight.

        (I) h <= D(h) pointwise; (II) ||D(h)|| <= (2 - 2^-depth) ||h|| with A
        the realized step bound; (III) [D(h) omega]_2 <= 2 A [omega]_p^(1/(p-1))
        times max D_{depth+1}/D_depth, through the box product bound for S.
        """
        logger.info(f"Rubio de Francia check for {weight.label}: p={p}, trials={trials}, depth={depth}")
        q = rdf_exponent(p)
        w = self.weight_values(weight)
        bb_boxes = self.box_bb(w, p)
        bb = float(np.nanmax(bb_boxes))
        box_bound = bb_boxes ** (1.0 / (p - 1.0))

        functions = [h / self.norm(h, w, q) for h in self.test_functions(trials, seed)]
        chains = [self.iterates(h, weight, p, depth + 1, w) for h in functions]
        A = max(self.chain_bound(chain, w, p) for chain in chains)

        gap, ratio_II, product, bb_III, bound_III, factor, ratio_III = math.inf, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
        nonempty = self.counts > 0
        for chain in chains:
            h = chain[0]
            d = self.series(chain, A, depth)
            d_next = self.series(chain, A, depth + 1)
            gap = min(gap, float(np.min(d - h)))
            ratio_II = max(ratio_II, self.norm(d, w, q) / self.norm(h, w, q))

            for g in (h, d):
                lhs = self.averages(g * w) * self.averages(1.0 / (self.rdf_S(g, weight, p, w) * w))
                product = max(product, float(np.max(lhs[nonempty] / box_bound[nonempty])))

            dw = d * w
            trial_bb = float(np.max((self.averages(dw) * self.averages(1.0 / dw))[nonempty]))
            trial_factor = float(np.max(d_next / d))
            trial_bound = 2.0 * A * bb ** (1.0 / (p - 1.0)) * trial_factor
            bb_III = max(bb_III, trial_bb)
            bound_III = max(bound_III, trial_bound)
            factor = max(factor, trial_factor)
            ratio_III = max(ratio_III, trial_bb / trial_bound)

        report = ExtrapolationReport(
            weight_label=weight.label, p=p, phi=phi(p), norm_exponent=q, A=A, truncation=depth,
            trials=len(functions), bb_grid=bb, min_gap_I=gap, max_norm_ratio_II=ratio_II,
            bound_II=2.0 - 2.0 ** (-depth), max_product_ratio=product, max_bb_III=bb_III,
            bound_III=bound_III, truncation_factor=factor, max_ratio_III=ratio_III,
        )
        logger.info(f"A={A:.4g}, [omega]_p={bb:.4g}, ||D||/||h||<={ratio_II:.4f}, [D omega]_2 ratio {ratio_III:.4f}")
        return report

    def maximal_norm_lb(self, w: np.ndarray, sigma: np.ndarray, p: float, boxes: np.ndarray) -> float:
        """max over the witness boxes B of ||M_alpha(sigma chi_B)|| / ||sigma chi_B|| in L^p(omega)."""
        best = 0.0
        for g in boxes:
            f = np.where(self.membership[g], sigma, 0.0)
            denominator = float(np.mean(f ** p * w))
            if denominator <= 0.0:
                continue
            numerator = float(np.mean(self.maximal(f) ** p * w))
            best = max(best, (numerator / denominator) ** (1.0 / p))
        return best

    def maximal_growth(self, weights: Sequence[Weight], p: float, witnesses: int = 20) -> List[MaximalGrowthRow]:
        """
        Lower bounds for ||M_alpha|| on L^p(omega dnu_alpha) and on the dual space, per weight.

        Witnesses are omega^(1-p') chi_B over the grid boxes with the largest
        product values; the dual side uses omega chi_B in L^p'(omega^(1-p')).
        """
        p_dual = dual_exponent(p)
        rows = []
        for weight in weights:
            w = self.weight_values(weight)
            sigma = self.weight_values(dual_weight(weight, p, self.ctx))
            bb_boxes = self.box_bb(w, p)
            dual_boxes = self.box_bb(sigma, p_dual)
            bb = float(np.nanmax(bb_boxes))
            dual_bb = float(np.nanmax(dual_boxes))
            bb_power = bb ** (1.0 / (p - 1.0))
            ranked = np.argsort(-np.nan_to_num(bb_boxes, nan=-np.inf), kind="stable")[:witnesses]
            norm_lb = self.maximal_norm_lb(w, sigma, p, ranked)
            dual_norm_lb = self.maximal_norm_lb(sigma, w, p_dual, ranked)
            rows.append(MaximalGrowthRow(
                delta=weight.delta if weight.delta is not None else float("nan"),
                p=p, bb_constant=bb, bb_power=bb_power, norm_lb=norm_lb, ratio=norm_lb / bb_power,
                dual_bb_constant=dual_bb, duality_error=abs(dual_bb - bb_power) / bb_power,
                dual_norm_lb=dual_norm_lb,
            ))
            logger.info(f"Maximal growth {weight.label}: ||M||>={norm_lb:.4g}, [omega]^(1/(p-1))={bb_power:.4g}")
        return rows
