"""
Dyadic Service for the ProjectCarleson system.
Builds dyadic systems on the sphere from nested maximal nets, locates points
in them, and measures the realized constants of a family of rotated systems.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.neighbors import KDTree

from models.dyadic import REFERENCE_TRIPLE, AdjacentFamily, CoverReport, DyadicCube, DyadicSystem
from models.errors import CoverageFailure, NetTooSparse, PreconditionViolation
from models.geometry import CarlesonBox, SpherePoint
from .geometry_service import (
    chord_from_rho,
    golden_points,
    random_rotation,
    random_sphere_points,
    rho_from_chord,
    rho_many,
    rng_stream,
)

# Initialize logging
logger = logging.getLogger(__name__)

MAX_CANDIDATES = 1_000_000
MIN_CANDIDATES = 2_000
KAPPA0_NEIGHBOURS = 6
RING_DIRECTIONS = 24
CHORD_BLOCK = 2048


def candidate_count(n: int, eta: float, depth: int) -> int:
    """Size of the base point set; the Fibonacci lattice grows with the finest scale."""
    if n > 3:
        return MAX_CANDIDATES
    return int(np.clip(64.0 / eta ** (2 * depth), MIN_CANDIDATES, MAX_CANDIDATES))


def base_candidates(n: int, eta: float, depth: int, seed: int, count: Optional[int] = None) -> np.ndarray:
    """Deterministic low-discrepancy points on the sphere: Fibonacci for n=3, seeded uniform otherwise."""
    count = count or candidate_count(n, eta, depth)
    if n == 3:
        return golden_points(count)
    return random_sphere_points(count, n, rng_stream(seed, "dyadic-candidates"))


def _greedy_net(tree: KDTree, candidates: np.ndarray, chord: float, seeds: List[int]) -> List[int]:
    """Maximal chord-separated subset, accepting the seeds first and then candidates in index order."""
    blocked = np.zeros(candidates.shape[0], dtype=bool)
    accepted: List[int] = []
    for i in seeds:
        accepted.append(i)
        blocked[tree.query_radius(candidates[i:i + 1], r=chord)[0]] = True
    for i in range(candidates.shape[0]):
        if blocked[i]:
            continue
        accepted.append(i)
        blocked[tree.query_radius(candidates[i:i + 1], r=chord)[0]] = True
    return accepted


def _max_chord(points: np.ndarray) -> float:
    """Largest pairwise Euclidean distance, computed in blocks."""
    if points.shape[0] < 2:
        return 0.0
    best = 0.0
    for start in range(0, points.shape[0], CHORD_BLOCK):
        best = max(best, float(cdist(points[start:start + CHORD_BLOCK], points).max()))
    return best


def locate(p, system: DyadicSystem) -> List[int]:
    """Root-to-leaf chain of cube ids (levels 1..K) of the cells containing p."""
    coords = p.coords if isinstance(p, SpherePoint) else np.asarray(p, dtype=float)
    return [int(c) for c in system.descend(coords[None, :])[0]]


def locate_brute_force(p, system: DyadicSystem) -> List[int]:
    """Reference descent: nearest center by geodesic distance among the current candidates, lowest id on ties."""
    coords = p.coords if isinstance(p, SpherePoint) else np.asarray(p, dtype=float)
    candidates = [int(i) for i in system.ids_at(1)]
    path: List[int] = []
    for _ in range(system.depth):
        dists = rho_many(system.centers[candidates], np.broadcast_to(coords, (len(candidates), coords.size)))
        best = candidates[int(np.argmin(dists))]
        path.append(best)
        children = system.children_pad[best]
        candidates = [int(c) for c in children[children >= 0]]
    return path


def epsilon_box(cube: DyadicCube, eps: float) -> CarlesonBox:
    """The top eps-fraction (in radial height) of the cube's Carleson box."""
    if not (0.0 < eps <= 1.0):
        raise PreconditionViolation(f"eps must lie in (0, 1], got {eps}")
    return CarlesonBox(base=cube, height=eps * cube.box_height)


def collar_report(system: DyadicSystem) -> List[Dict]:
    """
    Per level, the smallest eps* with every child box inside its parent's eps*-box.

    Collars Q^ minus Q^_{eps*} of a parent and of its children are disjoint
    whenever eps* < 1; levels whose parents are clamped to height 1 are marked.
    """
    rows = []
    for level in range(2, system.depth + 1):
        ids = system.ids_at(level)
        parents = system.parent[ids]
        ratios = system.box_height[ids] / system.box_height[parents]
        eps_star = float(ratios.max())
        rows.append({
            "level": level,
            "eps_star": eps_star,
            "disjoint": eps_star < 1.0,
            "clamped_parents": int(np.sum(system.box_height[parents] >= 1.0)),
        })
    return rows


def reference_collar_bound() -> float:
    """(kappa1 / kappa0) * eta for the triple (1/96, 1/12, 4); the child-to-parent height bound."""
    eta, kappa0, kappa1 = REFERENCE_TRIPLE
    return kappa1 / kappa0 * eta


class DyadicService:
    """
    Service for building dyadic systems and adjacent families on the sphere.
    Keeps the probe settings shared by construction and constant measurement.
    """

    def __init__(self, probe_points: int = 100_000, cover_caps: int = 1_000, max_systems: int = 8):
        """Initialize the Dyadic Service."""
        logger.info("Initializing Dyadic Service")
        self.probe_points = probe_points
        self.cover_caps = cover_caps
        self.max_systems = max_systems

    def build_system(
        self,
        n: int,
        eta: float,
        depth: int,
        seed: int,
        rotation: Optional[np.ndarray] = None,
        system_index: int = 0,
        candidates: Optional[np.ndarray] = None,
    ) -> DyadicSystem:
        """
        Build one dyadic system from nested greedy maximal eta^k-nets.

        Args:
            n: ambient dimension
            eta: scale ratio in (0, 1/2]
            depth: number of levels K
            seed: run seed
            rotation: rotation applied to the base point set (identity by default)
            system_index: position inside a family
            candidates: base point set; built from (n, eta, depth, seed) when omitted

        Returns:
            The assembled DyadicSystem with realized kappa0/kappa1 per level

        Raises:
            NetTooSparse: if the candidate set cannot carry the net at some level
        """
        if not (0.0 < eta <= 0.5):
            raise PreconditionViolation(f"eta must lie in (0, 1/2], got {eta}")
        if depth < 1:
            raise PreconditionViolation(f"depth must be at least 1, got {depth}")
        rotation = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
        base = base_candidates(n, eta, depth, seed) if candidates is None else candidates
        points = base @ rotation.T
        logger.info(f"Building dyadic system {system_index}: n={n}, eta={eta:g}, K={depth}, {points.shape[0]} candidates")

        tree = KDTree(points)
        probes = random_sphere_points(self.probe_points, n, rng_stream(seed, f"dyadic-probe-{system_index}"))
        fill_chord, _ = tree.query(probes, k=1)
        fill = float(rho_from_chord(fill_chord.max()))

        net: List[int] = []
        level_nets: List[List[int]] = []
        for k in range(1, depth + 1):
            if fill >= eta ** k / 2.0:
                raise NetTooSparse(k, f"candidate fill distance {fill:.4g} too coarse for the level-{k} net")
            current = _greedy_net(tree, points, float(chord_from_rho(eta ** k)), net)
            if k > 1 and len(current) == len(net):
                raise NetTooSparse(k, f"level {k} adds no net points")
            level_nets.append(current)
            net = current
            logger.debug(f"Level {k}: {len(current)} net points")

        centers = np.concatenate([points[ids] for ids in level_nets])
        level = np.concatenate([np.full(len(ids), k + 1, dtype=np.int64) for k, ids in enumerate(level_nets)])
        parent = np.full(level.size, -1, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum([len(ids) for ids in level_nets])])

        # parents: the level-(k-1) cell holding the net point under the partial descent
        for k in range(2, depth + 1):
            partial = DyadicSystem.assemble(
                n=n, eta=eta, depth=k - 1, seed=seed,
                centers=centers[:offsets[k - 1]], level=level[:offsets[k - 1]],
                parent=parent[:offsets[k - 1]], diam_est=np.zeros(offsets[k - 1]),
            )
            parent[offsets[k - 1]:offsets[k]] = partial.descend(centers[offsets[k - 1]:offsets[k]])[:, k - 2]

        skeleton = DyadicSystem.assemble(n=n, eta=eta, depth=depth, seed=seed, centers=centers,
                                         level=level, parent=parent, diam_est=np.zeros(level.size))
        path = skeleton.descend(probes)
        kappa0, kappa1 = self._realized_kappas(skeleton, probes, path)

        slack = 2.0 * kappa1[-1] * eta ** depth
        diam_est = self._diameters(skeleton) + slack
        system = DyadicSystem.assemble(
            n=n, eta=eta, depth=depth, seed=seed, centers=centers, level=level, parent=parent,
            diam_est=np.minimum(diam_est, math.pi), rotation=rotation, system_index=system_index,
            realized_kappa0=kappa0, realized_kappa1=kappa1,
        )
        logger.info(f"System {system_index} built: {system.size} cubes, "
                    f"kappa0 min {system.realized_kappa0_min:.4g}, kappa1 max {system.realized_kappa1_max:.4g}")
        return system

    def _realized_kappas(self, system: DyadicSystem, probes: np.ndarray, path: np.ndarray) -> Tuple[List[float], List[float]]:
        """Inner and outer sandwich radii per level, in units of eta^k, from the probe set."""
        kappa0: List[float] = []
        kappa1: List[float] = []
        for k in range(1, system.depth + 1):
            ids = system.ids_at(k)
            cell = path[:, k - 1]
            outer = rho_many(probes, system.centers[cell]).max()
            kappa1.append(float(outer / system.eta ** k))

            level_tree = KDTree(system.centers[ids])
            neighbours = min(KAPPA0_NEIGHBOURS, ids.size)
            chords, idx = level_tree.query(probes, k=neighbours)
            foreign = idx != (cell - ids[0])[:, None]
            inner = np.full(ids.size, np.inf)
            np.minimum.at(inner, idx[foreign], chords[foreign])
            finite = inner[np.isfinite(inner)]
            kappa0.append(float(rho_from_chord(finite.min()) / system.eta ** k) if finite.size else float("nan"))
        return kappa0, kappa1

    def _diameters(self, system: DyadicSystem) -> np.ndarray:
        """Max pairwise geodesic distance among each cube's deepest-level descendant centers."""
        diam = np.zeros(system.size)
        leaves = system.leaf_ancestors[:, -1]
        for k in range(1, system.depth + 1):
            owners = system.leaf_ancestors[:, k - 1]
            order = np.argsort(owners, kind="stable")
            groups, starts = np.unique(owners[order], return_index=True)
            bounds = np.append(starts, order.size)
            for g, cube in enumerate(groups):
                members = leaves[order[bounds[g]:bounds[g + 1]]]
                diam[cube] = float(rho_from_chord(_max_chord(system.centers[members])))
        return diam

    def build_family(self, n: int, eta: float, depth: int, N: int, seed: int,
                     candidates: Optional[np.ndarray] = None, check_cover: bool = True) -> AdjacentFamily:
        """
        N systems built from rotated copies of one base point set.

        System 0 uses the identity; system t uses a Haar rotation drawn from
        its own seed stream. When the cover scan finds an uncovered cap, one
        more system is added, up to max_systems.

        Raises:
            CoverageFailure: if caps stay uncovered with max_systems systems
        """
        if N < 1:
            raise PreconditionViolation(f"N must be at least 1, got {N}")
        base = base_candidates(n, eta, depth, seed) if candidates is None else candidates
        systems = [self._family_member(n, eta, depth, seed, t, base) for t in range(N)]
        family = AdjacentFamily(systems=systems)
        if not check_cover:
            return family
        while True:
            try:
                report = self.cover_constant(family, seed)
                family.cover = report
                family.cover_constant = report.cover_constant
                return family
            except CoverageFailure as e:
                if family.N >= self.max_systems:
                    raise
                logger.warning(f"Cover scan failed with N={family.N}; retrying with N={family.N + 1}: {str(e)}")
                family.systems.append(self._family_member(n, eta, depth, seed, family.N, base))

    def _family_member(self, n: int, eta: float, depth: int, seed: int, t: int, base: np.ndarray) -> DyadicSystem:
        rotation = np.eye(n) if t == 0 else random_rotation(n, rng_stream(seed, f"rotation-{t}"))
        return self.build_system(n, eta, depth, seed, rotation=rotation, system_index=t, candidates=base)

    def cap_rings(self, centers: np.ndarray, radii: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Probe points on the boundary circle and the half-radius circle of each cap, shape (m, 2R, n)."""
        m, n = centers.shape
        tangent = rng.standard_normal((m, RING_DIRECTIONS, n))
        tangent -= np.einsum("mrn,mn->mr", tangent, centers)[:, :, None] * centers[:, None, :]
        tangent /= np.linalg.norm(tangent, axis=2)[:, :, None]
        rings = []
        for scale in (1.0, 0.5):
            theta = (scale * radii)[:, None, None]
            rings.append(np.cos(theta) * centers[:, None, :] + np.sin(theta) * tangent)
        return np.concatenate(rings, axis=1)

    def best_cubes(self, system: DyadicSystem, centers: np.ndarray, radii: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
        """Deepest cube containing each cap (its center and probe rings all descend through it), -1 when none."""
        rings = self.cap_rings(centers, radii, rng)
        m, r, n = rings.shape
        center_path = system.descend(centers)
        ring_path = system.descend(rings.reshape(m * r, n)).reshape(m, r, system.depth)
        agree = np.all(ring_path == center_path[:, None, :], axis=1)
        # agreement is a prefix of the chain, so its length is the containing depth
        depth_ok = np.cumprod(agree, axis=1).sum(axis=1)
        best = np.full(m, -1, dtype=np.int64)
        covered = depth_ok > 0
        best[covered] = center_path[covered, depth_ok[covered] - 1]
        return best

    def cover_constant(self, family: AdjacentFamily, seed: int, caps: Optional[int] = None) -> CoverReport:
        """
        Realized C3: max over test caps of (best cube diameter) / (cap diameter).

        Test radii are log-spaced between the finest scale eta^K and eta/10;
        a few coarse caps of radius eta are added and only flagged when
        uncovered.

        Raises:
            CoverageFailure: if a fine-scale test cap lies in no cube of any system
        """
        caps = caps or self.cover_caps
        n, eta, depth = family.n, family.eta, family.depth
        rng = rng_stream(seed, "cover-caps")
        fine = max(caps - 10, 1)
        centers = random_sphere_points(caps, n, rng)
        radii = np.concatenate([
            np.exp(rng.uniform(math.log(eta ** depth), math.log(eta / 10.0), fine))
            if eta ** depth < eta / 10.0 else np.full(fine, eta / 10.0),
            np.full(caps - fine, eta),
        ])
        coarse = np.arange(caps) >= fine

        best_ratio = np.full(caps, np.inf)
        best_where = np.full((caps, 2), -1, dtype=np.int64)
        for system in family.systems:
            cubes = self.best_cubes(system, centers, radii, rng_stream(seed, f"cover-rings-{system.system_index}"))
            ok = cubes >= 0
            ratio = np.full(caps, np.inf)
            ratio[ok] = system.diam_est[cubes[ok]] / np.minimum(2.0 * radii[ok], math.pi)
            better = ratio < best_ratio
            best_ratio[better] = ratio[better]
            best_where[better] = np.column_stack([np.full(int(better.sum()), system.system_index), cubes[better]])

        uncovered = ~np.isfinite(best_ratio)
        failing = np.flatnonzero(uncovered & ~coarse)
        if failing.size:
            j = int(failing[0])
            witness = {"center": centers[j].tolist(), "radius": float(radii[j])}
            raise CoverageFailure(witness, f"{failing.size} test caps uncovered by {family.N} systems")
        flagged = int(np.sum(uncovered & coarse))
        if flagged:
            logger.warning(f"{flagged} coarse test caps are covered by no cube")

        covered = np.flatnonzero(~uncovered)
        worst = int(covered[np.argmax(best_ratio[covered])])
        report = CoverReport(
            caps_tested=caps,
            caps_covered=int(covered.size),
            caps_flagged=flagged,
            cover_constant=float(best_ratio[worst]),
            worst_cap={
                "center": centers[worst].tolist(),
                "radius": float(radii[worst]),
                "system": int(best_where[worst, 0]),
                "cube": int(best_where[worst, 1]),
            },
        )
        logger.info(f"Cover scan: {report.caps_covered}/{caps} caps covered, C3={report.cover_constant:.4g}")
        return report
