"""
Operator Service for the ProjectCarleson system.
Shared sample pool, box measures, the positive dyadic operator T and its
kernel, dyadic and global maximal functions, and operator-norm estimation.

Every sweep runs over the cube tree level by level: cube ids are grouped by
level, so bincount over parent ids moves values one level up and fancy
indexing by parent ids moves them one level down.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from models.dyadic import AdjacentFamily, DyadicSystem
from models.errors import NonConvergence, PreconditionViolation
from models.measure import AlphaContext, MeasureMethod, MeasureValue
from models.operators import (
    BoxFunction,
    BoxMeasures,
    CapGrid,
    DominationReport,
    MeasureMode,
    NormReport,
    SamplePool,
)
from models.geometry import CarlesonBox
from models.weights import Weight
from .geometry_service import (
    bracket_many,
    box_contains,
    enclosing_cap_many,
    golden_points,
    random_sphere_points,
    rng_stream,
)
from .measure_service import AlphaSampler, annulus_masses

# Initialize logging
logger = logging.getLogger(__name__)

PoolValues = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], float]

STAGNATION_WINDOW = 100


def _split(total: int, shards: int) -> List[Tuple[int, int]]:
    sizes = [total // shards + (1 if i < total % shards else 0) for i in range(shards)]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(shards) if sizes[i] > 0]


def box_depths(system: DyadicSystem, path: np.ndarray, modulus: np.ndarray) -> np.ndarray:
    """Number of boxes along each point's chain that contain it; heights shrink down a chain so this is a prefix."""
    inside = (modulus[:, None] > 1.0 - system.box_height[path]) & (modulus[:, None] < 1.0)
    return inside.sum(axis=1)


def deepest_boxes(system: DyadicSystem, path: np.ndarray, modulus: np.ndarray) -> np.ndarray:
    """Id of the deepest box containing each point, -1 when no box does."""
    depth = box_depths(system, path, modulus)
    deepest = np.full(path.shape[0], -1, dtype=np.int64)
    hit = depth > 0
    deepest[hit] = path[np.flatnonzero(hit), depth[hit] - 1]
    return deepest


def _weight_key(weight: Optional[Weight]) -> Tuple:
    """Cache key for box measures: power weights by their parameters, anything else by identity."""
    if weight is None:
        return ("power", 0.0, 1.0)
    if weight.is_power and weight.evaluator is None:
        return ("power", float(weight.exponent), float(weight.scale))
    return ("object", id(weight))


def aggregate_up(system: DyadicSystem, values: np.ndarray) -> np.ndarray:
    """Subtree sums: every cube receives the total of its descendants."""
    out = np.array(values, dtype=float, copy=True)
    for k in range(system.depth, 1, -1):
        ids = system.ids_at(k)
        out += np.bincount(system.parent[ids], weights=out[ids], minlength=system.size)
    return out


def prefix_down(system: DyadicSystem, values: np.ndarray, op: Callable = np.add) -> np.ndarray:
    """Chain accumulation from the root: out[Q] = op(values[Q], out[parent(Q)])."""
    out = np.array(values, dtype=float, copy=True)
    for k in range(2, system.depth + 1):
        ids = system.ids_at(k)
        out[ids] = op(out[ids], out[system.parent[ids]])
    return out


def gram_apply(system: DyadicSystem, mu: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Product with the box Gram matrix G[Q,R] = mu(Q^ and R^).

    Boxes of nested cubes are nested and boxes of disjoint cubes are
    disjoint, so (Gv)_Q = mu_Q * (sum of v over Q and its ancestors)
    + (sum of mu_R v_R over the strict descendants R of Q).
    """
    ancestors = prefix_down(system, v)
    below = np.zeros(system.size)
    for k in range(system.depth, 1, -1):
        ids = system.ids_at(k)
        below += np.bincount(system.parent[ids], weights=mu[ids] * v[ids] + below[ids], minlength=system.size)
    return mu * ancestors + below


def dense_gram(system: DyadicSystem, mu: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Dense Gram matrix on the active cubes (small systems only)."""
    size = system.size
    gram = np.diag(mu.astype(float))
    cubes = np.arange(size)
    anc = system.parent.copy()
    while np.any(anc >= 0):
        valid = anc >= 0
        gram[cubes[valid], anc[valid]] = mu[cubes[valid]]
        gram[anc[valid], cubes[valid]] = mu[cubes[valid]]
        anc = np.where(valid, system.parent[np.where(valid, anc, 0)], -1)
    return gram[np.ix_(active, active)]


def pool_box_mass(pool: SamplePool, box: CarlesonBox) -> MeasureValue:
    """Empirical nu_alpha mass of a box with its binomial standard error."""
    inside = box_contains(box, pool.points)
    p = float(inside.mean())
    return MeasureValue(value=p, abs_error=math.sqrt(max(p * (1.0 - p), 0.0) / pool.size),
                        method=MeasureMethod.MONTE_CARLO, samples=pool.size)


def build_pool(M: int, ctx: AlphaContext, family: Optional[AdjacentFamily], seed: int,
               shards: int = 8, threads: int = 1, stream: str = "pool") -> SamplePool:
    """
    Sample M points of nu_alpha and locate them in every system of the family.

    Shards are fixed by `shards` and drawn from their own seed streams, so
    the pool is bit-identical for any thread count.
    """
    logger.info(f"Building sample pool: M={M}, shards={shards}, threads={threads}")
    sampler = AlphaSampler(ctx)
    parts = _split(M, shards)

    def draw(i: int):
        start, stop = parts[i]
        return sampler.sample(stop - start, rng_stream(seed, f"{stream}-shard-{i}"))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        drawn = list(executor.map(draw, range(len(parts))))
    pool = SamplePool(
        n=ctx.n,
        alpha=ctx.alpha,
        seed=seed,
        points=np.concatenate([d[0] for d in drawn]),
        modulus=np.concatenate([d[1] for d in drawn]),
        one_minus_sq=np.concatenate([d[2] for d in drawn]),
        shards=shards,
    )
    if family is not None:
        locate_pool(pool, family, threads)
    return pool


def locate_pool(pool: SamplePool, family: AdjacentFamily, threads: int = 1) -> SamplePool:
    """Fill the per-system leaf and deepest-box columns of a pool."""
    parts = _split(pool.size, pool.shards)
    pool.leaves = []
    pool.deepest = []
    for system in family.systems:
        def locate_part(bounds):
            start, stop = bounds
            path = system.descend(pool.points[start:stop])
            return path[:, -1], deepest_boxes(system, path, pool.modulus[start:stop])

        with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
            located = list(executor.map(locate_part, parts))
        pool.leaves.append(np.concatenate([l[0] for l in located]).astype(np.int32))
        pool.deepest.append(np.concatenate([l[1] for l in located]).astype(np.int32))
        logger.debug(f"Pool located in system {system.system_index}")
    return pool


def build_cap_grid(n: int, centers: int = 64, radii: Optional[List[float]] = None,
                   seed: int = 0, include_whole: bool = True) -> CapGrid:
    """
    Cap grid for global maxima: centers x log-spaced radii, plus the radius-pi box of height 1.

    Centers are a Fibonacci lattice on S^2 and seeded uniform points otherwise.
    """
    radii = list(np.logspace(-1, 0, 8)) if radii is None else list(radii)
    base = golden_points(centers) if n == 3 else random_sphere_points(centers, n, rng_stream(seed, "cap-grid"))
    grid_centers = np.repeat(base, len(radii), axis=0)
    grid_radii = np.tile(np.asarray(radii, dtype=float), centers)
    if include_whole:
        grid_centers = np.vstack([grid_centers, base[:1]])
        grid_radii = np.append(grid_radii, math.pi)
    return CapGrid(centers=grid_centers, radii=grid_radii,
                   description=f"{centers} centers x {len(radii)} radii in [{min(radii):.3g}, {max(radii):.3g}]"
                               + (" + whole ball" if include_whole else ""))


def grid_membership(grid: CapGrid, points: np.ndarray) -> np.ndarray:
    """Boolean matrix (G, m): point j lies in the box over grid cap g."""
    pts = np.atleast_2d(points)
    modulus = np.linalg.norm(pts, axis=1)
    directions = pts / np.where(modulus > 0.0, modulus, 1.0)[:, None]
    angular = directions @ grid.centers.T  # (m, G)
    inside = (angular > np.cos(grid.radii)[None, :]) | (grid.radii[None, :] >= math.pi)
    inside &= (modulus[:, None] > 1.0 - grid.heights[None, :]) & (modulus[:, None] > 0.0)
    return inside.T


def grid_averages(values: np.ndarray, membership: np.ndarray) -> np.ndarray:
    """Pool averages of values over every grid box (0 for empty boxes)."""
    counts = membership.sum(axis=1)
    sums = membership @ values
    return np.divide(sums, counts, out=np.zeros_like(sums, dtype=float), where=counts > 0)


def global_maximal_on_pool(values: np.ndarray, membership: np.ndarray,
                           at: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Grid maximal function M_alpha |f| from pool averages.

    Args:
        values: f at the pool points
        membership: grid_membership of the pool
        at: grid_membership of the evaluation points (the pool itself by default)
    """
    averages = grid_averages(np.abs(values), membership)
    at = membership if at is None else at
    order = np.argsort(-averages, kind="stable")
    ranked = at[order]
    # the first containing box in decreasing-average order attains the maximum
    first = np.argmax(ranked, axis=0)
    return np.where(ranked.any(axis=0), averages[order][first], 0.0)


def apply_global_maximal(values: np.ndarray, grid: CapGrid, pool: SamplePool, x: np.ndarray) -> np.ndarray:
    """M_alpha |f| at arbitrary points, with averages taken over the pool."""
    return global_maximal_on_pool(values, grid_membership(grid, pool.points), grid_membership(grid, x))


class OperatorService:
    """
    Matrix-free positive dyadic operators over a shared sample pool.
    Caches per-(system, weight, mode) box measures.
    """

    def __init__(self, ctx: AlphaContext, family: AdjacentFamily, pool: SamplePool, min_occupancy: int = 30):
        """Initialize the Operator Service."""
        logger.info("Initializing Operator Service")
        if len(pool.leaves) != family.N:
            raise PreconditionViolation("the pool is not located in every system of the family")
        self.ctx = ctx
        self.family = family
        self.pool = pool
        self.min_occupancy = min_occupancy
        self._measures: Dict[Tuple, Tuple[Optional[Weight], BoxMeasures]] = {}
        self._counts: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    # -- pool bookkeeping -------------------------------------------------

    def _pool_values(self, f: PoolValues) -> np.ndarray:
        if callable(f):
            return np.asarray(f(self.pool.points), dtype=float)
        if np.isscalar(f):
            return np.full(self.pool.size, float(f))
        values = np.asarray(f, dtype=float)
        if values.shape != (self.pool.size,):
            raise PreconditionViolation(f"expected {self.pool.size} pool values, got shape {values.shape}")
        return values

    def _weight_values(self, weight: Optional[Weight]) -> np.ndarray:
        if weight is None:
            return np.ones(self.pool.size)
        return weight.evaluate_on(self.pool.modulus, self.pool.one_minus_sq, self.pool.points)

    def box_sums(self, t: int, values: np.ndarray) -> np.ndarray:
        """Sum of values over the pool points of every box of system t."""
        system = self.family.systems[t]
        deepest = self.pool.deepest[t]
        hit = deepest >= 0
        return aggregate_up(system, np.bincount(deepest[hit], weights=values[hit], minlength=system.size))

    def cell_fractions(self, t: int, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """Fraction of pool directions in every sphere cell (optionally restricted to a mask)."""
        system = self.family.systems[t]
        leaves = self.pool.leaves[t] if mask is None else self.pool.leaves[t][mask]
        return aggregate_up(system, np.bincount(leaves, minlength=system.size).astype(float)) / self.pool.size

    def occupancy(self, t: int) -> np.ndarray:
        if t not in self._counts:
            counts = self.box_sums(t, np.ones(self.pool.size))
            self._counts[t] = (counts, self.cell_fractions(t))
        return self._counts[t][0]

    def box_measures(self, t: int, weight: Optional[Weight] = None, mode: Optional[MeasureMode] = None) -> BoxMeasures:
        """
        Box masses |Q^|_alpha and |Q^|_{omega,alpha} for every cube of system t.

        Radial weights default to RADIAL mode (pool cell fractions times exact
        radial integrals); everything else uses POOL sums.
        """
        radial = weight is None or weight.is_radial
        mode = mode or (MeasureMode.RADIAL if radial else MeasureMode.POOL)
        if mode == MeasureMode.RADIAL and not radial:
            raise PreconditionViolation(f"radial box measures need a radial weight, got {weight.label}")
        label = "one" if weight is None else weight.label
        key = (t, _weight_key(weight), mode.value)
        if key in self._measures:
            return self._measures[key][1]

        system = self.family.systems[t]
        counts = self.occupancy(t)
        if mode == MeasureMode.RADIAL:
            sigma = self._counts[t][1]
            alpha_mass = sigma * annulus_masses(self.ctx, None, system.box_height)
            weight_mass = sigma * annulus_masses(self.ctx, weight, system.box_height)
        else:
            sigma = None
            alpha_mass = counts / self.pool.size
            weight_mass = self.box_sums(t, self._weight_values(weight)) / self.pool.size
        measures = BoxMeasures(system_index=t, mode=mode, weight_label=label, alpha_mass=alpha_mass,
                               weight_mass=weight_mass, occupancy=counts.astype(np.int64), cell_sigma=sigma)
        # the weight is held so an identity key cannot be reused by a new object
        self._measures[key] = (weight, measures)
        return measures

    # -- operator application ---------------------------------------------

    def apply_T(self, f: PoolValues, weight: Optional[Weight], t: int) -> BoxFunction:
        """
        Coefficients c_Q = |Q^|_alpha^-1 * int_{Q^} f omega d nu_alpha in one bottom-up sweep.

        Boxes with fewer than min_occupancy pool points are counted as unreliable.
        """
        values = self._pool_values(f) * self._weight_values(weight)
        measures = self.box_measures(t, None, MeasureMode.POOL)
        sums = self.box_sums(t, values) / self.pool.size
        coefficients = np.divide(sums, measures.alpha_mass, out=np.zeros_like(sums), where=measures.alpha_mass > 0)
        unreliable = int(np.sum(measures.occupancy < self.min_occupancy))
        if unreliable:
            logger.warning(f"apply_T on system {t}: {unreliable} boxes below {self.min_occupancy} pool points")
        return BoxFunction(system_index=t, coefficients=coefficients, unreliable=unreliable,
                           label=f"T[{'one' if weight is None else weight.label}]")

    def evaluate(self, bf: BoxFunction, x: np.ndarray) -> np.ndarray:
        """sum_Q c_Q chi_{Q^}(x) at arbitrary points."""
        system = self.family.systems[bf.system_index]
        x = np.atleast_2d(x)
        deepest = deepest_boxes(system, system.descend(x), np.linalg.norm(x, axis=1))
        return self._chain_lookup(system, prefix_down(system, bf.coefficients), deepest)

    def evaluate_on_pool(self, bf: BoxFunction) -> np.ndarray:
        system = self.family.systems[bf.system_index]
        return self._chain_lookup(system, prefix_down(system, bf.coefficients), self.pool.deepest[bf.system_index])

    @staticmethod
    def _chain_lookup(system: DyadicSystem, chain: np.ndarray, deepest: np.ndarray) -> np.ndarray:
        out = np.zeros(deepest.size)
        hit = deepest >= 0
        out[hit] = chain[deepest[hit]]
        return out

    def kernel_sum_many(self, x: np.ndarray, y: np.ndarray, systems: Optional[List[int]] = None) -> np.ndarray:
        """
        sum_t K^t_alpha(x, y) for paired rows: the common box chain of x and y per system.

        Exactly symmetric in x and y.
        """
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        total = np.zeros(x.shape[0])
        for t in (range(self.family.N) if systems is None else systems):
            system = self.family.systems[t]
            px, py = system.descend(x), system.descend(y)
            dx = box_depths(system, px, np.linalg.norm(x, axis=1))
            dy = box_depths(system, py, np.linalg.norm(y, axis=1))
            total += self._kernel_terms(system, self._inverse_chain(t), px, dx, py, dy)
        return total

    def _inverse_chain(self, t: int) -> np.ndarray:
        """Chain sums of 1/|Q^|_alpha from the root (empty boxes contribute 0)."""
        mass = self.box_measures(t, None, MeasureMode.POOL).alpha_mass
        inv = np.divide(1.0, mass, out=np.zeros_like(mass), where=mass > 0)
        return prefix_down(self.family.systems[t], inv)

    @staticmethod
    def _kernel_terms(system: DyadicSystem, chain: np.ndarray, px: np.ndarray, dx: np.ndarray,
                      py: np.ndarray, dy: np.ndarray) -> np.ndarray:
        shared = np.cumprod(px == py, axis=1).sum(axis=1)
        common = np.minimum(np.minimum(dx, dy), shared)
        out = np.zeros(common.size)
        hit = common > 0
        rows = np.flatnonzero(hit)
        out[hit] = chain[px[rows, common[hit] - 1]]
        return out

    def kernel_sum(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.kernel_sum_many(np.asarray(x)[None, :], np.asarray(y)[None, :])[0])

    def direct_T(self, f: PoolValues, weight: Optional[Weight], t: int, x: np.ndarray) -> np.ndarray:
        """Reference evaluation of T^t f at x by summing the kernel against every pool point."""
        system = self.family.systems[t]
        values = self._pool_values(f) * self._weight_values(weight)
        chain = self._inverse_chain(t)
        py = system.descend(self.pool.points)
        dy = box_depths(system, py, self.pool.modulus)
        x = np.atleast_2d(x)
        px = system.descend(x)
        dx = box_depths(system, px, np.linalg.norm(x, axis=1))
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            rows_x = np.broadcast_to(px[i], py.shape)
            kernel = self._kernel_terms(system, chain, rows_x, np.full(py.shape[0], dx[i]), py, dy)
            out[i] = float(kernel @ values) / self.pool.size
        return out

    def _maximal_chain(self, f: PoolValues, weight: Optional[Weight], t: int) -> np.ndarray:
        """Running maximum of the omega-averages of |f| down every box chain."""
        system = self.family.systems[t]
        w = self._weight_values(weight)
        numerator = self.box_sums(t, np.abs(self._pool_values(f)) * w)
        denominator = self.box_sums(t, w)
        averages = np.divide(numerator, denominator, out=np.zeros_like(numerator), where=denominator > 0)
        return prefix_down(system, averages, np.maximum)

    def dyadic_maximal_on_pool(self, f: PoolValues, weight: Optional[Weight], t: int) -> np.ndarray:
        """M^t_{omega,alpha} f at every pool point: the largest omega-average of |f| along its box chain."""
        system = self.family.systems[t]
        return self._chain_lookup(system, self._maximal_chain(f, weight, t), self.pool.deepest[t])

    def apply_dyadic_maximal(self, f: PoolValues, weight: Optional[Weight], t: int, x: np.ndarray) -> np.ndarray:
        system = self.family.systems[t]
        x = np.atleast_2d(x)
        deepest = deepest_boxes(system, system.descend(x), np.linalg.norm(x, axis=1))
        return self._chain_lookup(system, self._maximal_chain(f, weight, t), deepest)

    # -- norms ------------------------------------------------------------

    def witness_ratio(self, t: int, weight: Weight, b: np.ndarray, f_norm_sq: float,
                      mode: Optional[MeasureMode] = None) -> float:
        """
        ||T_{omega^-1} f||_{L^2(omega)} / ||f||_{L^2(omega^-1)} from b_Q = int_{Q^} f omega^-1 d nu_alpha.
        """
        system = self.family.systems[t]
        mw = self.box_measures(t, weight, mode)
        coefficients = np.divide(b, mw.alpha_mass, out=np.zeros_like(b), where=mw.alpha_mass > 0)
        tf_sq = float(coefficients @ gram_apply(system, mw.weight_mass, coefficients))
        return math.sqrt(max(tf_sq, 0.0) / f_norm_sq)

    def operator_norm(self, weight: Weight, t: int, tol: float = 1e-8, max_iter: int = 1000,
                      dense_limit: int = 2000, seed: int = 0, mode: Optional[MeasureMode] = None,
                      strict: bool = False) -> NormReport:
        """
        Estimate ||T_{omega^-1}: L^2(omega^-1 d nu_alpha) -> L^2(omega d nu_alpha)||.

        The squared norm is the top eigenvalue of B = D G_omega D G_sigma in
        coefficient space (D = diag 1/|Q^|_alpha, sigma = omega^-1). B is
        nonnegative and splits into one irreducible block per level-1 cube;
        power iteration runs on all blocks at once with per-block
        normalization and stops on the Collatz-Wielandt bracket.

        Raises:
            NonConvergence: if strict and the bracket is still wider than tol after max_iter
        """
        system = self.family.systems[t]
        dual = weight.power(-1.0)
        mw = self.box_measures(t, weight, mode)
        ms = self.box_measures(t, dual, mw.mode)
        active = mw.alpha_mass > 0
        d = np.divide(1.0, mw.alpha_mass, out=np.zeros_like(mw.alpha_mass), where=active)
        roots = prefix_down(system, np.where(system.level == 1, np.arange(system.size), 0.0),
                            lambda own, parent: parent).astype(np.int64)
        blocks = roots[active]

        def apply_B(v: np.ndarray) -> np.ndarray:
            u = d * gram_apply(system, ms.weight_mass, v)
            return d * gram_apply(system, mw.weight_mass, u)

        # start from the coefficients of T applied to the constant function
        v = np.where(active, d * ms.weight_mass, 0.0)
        rng = rng_stream(seed, f"power-iteration-{t}")
        lo = hi = float("nan")
        best_width, stalled, restarts, iterations = math.inf, 0, 0, 0
        converged = False
        for iterations in range(1, max_iter + 1):
            w = apply_B(v)
            ratios = w[active] / v[active]
            block_hi = np.full(system.size, -np.inf)
            block_lo = np.full(system.size, np.inf)
            np.maximum.at(block_hi, blocks, ratios)
            np.minimum.at(block_lo, blocks, ratios)
            lo = float(block_lo[np.isfinite(block_lo)].max())
            hi = float(block_hi[np.isfinite(block_hi)].max())
            width = (hi - lo) / hi if hi > 0 else 0.0
            scale = np.zeros(system.size)
            np.maximum.at(scale, blocks, w[active])
            v = np.where(active, w / np.where(scale[roots] > 0, scale[roots], 1.0), 0.0)
            if width <= tol:
                converged = True
                break
            if width < 0.5 * best_width:
                best_width, stalled = width, 0
            else:
                stalled += 1
            if stalled >= STAGNATION_WINDOW:
                v = np.where(active, v * (1.0 + 0.1 * rng.random(system.size)), 0.0)
                restarts += 1
                stalled = 0
                best_width = math.inf
        residual = (hi - lo) / hi if hi > 0 else 0.0
        if not converged:
            if strict:
                raise NonConvergence(iterations, residual)
            logger.warning(f"Power iteration on system {t} stopped after {iterations} iterations (residual {residual:.3e})")

        dense_value = None
        symmetry_error = None
        if int(active.sum()) <= dense_limit and system.size <= 2 * dense_limit:
            dense_value, symmetry_error = self.dense_norm(system, mw, ms, active)

        # witness: the indicator of the union of the level-1 boxes
        total_sigma = float(ms.weight_mass[system.ids_at(1)].sum())
        lower = self.witness_ratio(t, weight, ms.weight_mass.copy(), total_sigma, mw.mode)
        report = NormReport(
            system_index=t,
            weight_label=weight.label,
            mode=mw.mode,
            lower_bound=lower,
            power_iter_estimate=math.sqrt(max(hi, 0.0)),
            iterations=iterations,
            residual=residual,
            converged=converged,
            blocks=int(np.unique(blocks).size),
            restarts=restarts,
            dense_oracle=dense_value,
            symmetry_error=symmetry_error,
        )
        logger.info(f"||T|| for {weight.label} on system {t}: {report.power_iter_estimate:.6g} "
                    f"(lower bound {lower:.6g}, {iterations} iterations)")
        return report

    @staticmethod
    def dense_norm(system: DyadicSystem, mw: BoxMeasures, ms: BoxMeasures, active: np.ndarray) -> Tuple[float, float]:
        """Dense oracle: sqrt of the top eigenvalue of G_s^(1/2) D G_w D G_s^(1/2), and its symmetry defect."""
        idx = np.flatnonzero(active)
        g_w = dense_gram(system, mw.weight_mass, idx)
        g_s = dense_gram(system, ms.weight_mass, idx)
        d = np.diag(1.0 / mw.alpha_mass[idx])
        evals, evecs = linalg.eigh(g_s)
        root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
        sandwich = root @ d @ g_w @ d @ root
        norm = float(np.linalg.norm(sandwich))
        symmetry = float(np.linalg.norm(sandwich - sandwich.T) / norm) if norm > 0 else 0.0
        top = float(linalg.eigh(0.5 * (sandwich + sandwich.T), eigvals_only=True)[-1])
        return math.sqrt(max(top, 0.0)), symmetry

    # -- domination -------------------------------------------------------

    def resolution_window(self) -> Tuple[float, float]:
        """Enclosing-cap radii where a depth-K system can dominate the size majorant."""
        system = self.family.systems[0]
        kappa1 = max(s.realized_kappa1[-1] for s in self.family.systems)
        floor = 4.0 * kappa1 * system.eta ** system.depth
        ceiling = min(0.5, system.eta)
        if floor >= ceiling:
            ceiling = min(0.95, 2.0 * floor)
        return floor, ceiling

    def domination_scan(self, pairs: int, seed: int) -> DominationReport:
        """
        Ratios [x,y]^-(n+alpha) / sum_t K^t(x,y) over pairs whose enclosing-cap radius
        lies in the resolution window. A pair with no common box has ratio inf, so any
        such pair makes max_ratio infinite.
        """
        n, alpha = self.ctx.n, self.ctx.alpha
        floor, ceiling = self.resolution_window()
        rng = rng_stream(seed, "domination-pairs")
        if floor >= ceiling:
            return DominationReport(seed=seed, pairs=0, floor=floor, ceiling=ceiling, zero_kernel=0,
                                    max_ratio=float("inf"), median_ratio=float("inf"))
        r = np.exp(rng.uniform(math.log(floor), math.log(ceiling), pairs))
        angle_dominates = rng.random(pairs) < 0.5
        theta = np.where(angle_dominates, r, r * rng.random(pairs))
        gap_y = np.where(angle_dominates, r * rng.random(pairs), r)
        gap_x = gap_y * rng.random(pairs)
        u = random_sphere_points(pairs, n, rng)
        tangent = rng.standard_normal((pairs, n))
        tangent -= np.sum(tangent * u, axis=1)[:, None] * u
        tangent /= np.linalg.norm(tangent, axis=1)[:, None]
        v = np.cos(theta)[:, None] * u + np.sin(theta)[:, None] * tangent
        x = u * (1.0 - gap_x)[:, None]
        y = v * (1.0 - gap_y)[:, None]
        _, radii = enclosing_cap_many(x, y)
        keep = (radii >= floor) & (radii <= ceiling) & (radii < 1.0)
        x, y = x[keep], y[keep]
        kernel = self.kernel_sum_many(x, y)
        size = bracket_many(x, y) ** (-(n + alpha))
        positive = kernel > 0
        ratios = np.where(positive, size / np.where(positive, kernel, 1.0), np.inf)
        report = DominationReport(
            seed=seed,
            pairs=int(keep.sum()),
            floor=floor,
            ceiling=ceiling,
            zero_kernel=int(np.sum(~positive)),
            max_ratio=float(ratios.max()) if ratios.size else float("inf"),
            median_ratio=float(np.median(ratios)) if ratios.size else float("inf"),
        )
        logger.info(f"Domination scan (seed {seed}): max ratio {report.max_ratio:.4g} over {report.pairs} pairs, "
                    f"{report.zero_kernel} without a common box")
        return report
