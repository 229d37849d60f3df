"""
Dyadic system data models for the ProjectCarleson system.

A DyadicSystem stores its cubes as flat arrays indexed by a global cube id;
ids are grouped by level (level 1 first) so every parent id is smaller than
the ids of its children. DyadicCube is a read-only record view of one id.
"""
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr

from .geometry import CarlesonBox, SpherePoint

# (eta, kappa0, kappa1) of the adjacent systems on the sphere
REFERENCE_TRIPLE = (1.0 / 96.0, 1.0 / 12.0, 4.0)

FORMAT_VERSION = 1


class DyadicCube(BaseModel):
    """Record view of one cube Q_{k,i} of a dyadic system."""
    id: int
    level: int
    index: int
    center: SpherePoint
    parent: Optional[int] = None
    children: List[int] = []
    diam_est: float
    box_height: float
    _system: Any = PrivateAttr(default=None)

    def contains_directions(self, points: np.ndarray) -> np.ndarray:
        """Membership of the directions of the given points in this cube's sphere cell."""
        path = self._system.descend(points)
        return path[:, self.level - 1] == self.id

    def box(self) -> CarlesonBox:
        return CarlesonBox(base=self, height=self.box_height)

    def to_dict(self) -> Dict:
        return {
            "id": self.id,
            "level": self.level,
            "index": self.index,
            "parent": self.parent,
            "children": self.children,
            "center": self.center.coords.tolist(),
            "diam_est": self.diam_est,
            "box_height": self.box_height,
        }


class DyadicSystem(BaseModel):
    """
    Nested hierarchical cells on the sphere realizing one dyadic system.

    Array fields are indexed by global cube id. children_pad lists the
    children of each cube in increasing id order, padded with -1;
    leaf_ancestors[j, k-1] is the level-k ancestor of the j-th leaf.
    """
    n: int
    eta: float
    kappa0_target: float = REFERENCE_TRIPLE[1]
    kappa1_target: float = REFERENCE_TRIPLE[2]
    depth: int
    seed: int
    system_index: int = 0
    rotation: np.ndarray
    centers: np.ndarray
    level: np.ndarray
    parent: np.ndarray
    diam_est: np.ndarray
    box_height: np.ndarray
    children_pad: np.ndarray
    leaf_ancestors: np.ndarray
    level_offsets: List[int]
    realized_kappa0: List[float] = Field(default_factory=list)
    realized_kappa1: List[float] = Field(default_factory=list)

    class Config:
        arbitrary_types_allowed = True

    @classmethod
    def assemble(
        cls,
        *,
        n: int,
        eta: float,
        depth: int,
        seed: int,
        centers: np.ndarray,
        level: np.ndarray,
        parent: np.ndarray,
        diam_est: np.ndarray,
        rotation: Optional[np.ndarray] = None,
        system_index: int = 0,
        realized_kappa0: Optional[List[float]] = None,
        realized_kappa1: Optional[List[float]] = None,
        kappa0_target: float = REFERENCE_TRIPLE[1],
        kappa1_target: float = REFERENCE_TRIPLE[2],
    ) -> "DyadicSystem":
        """Derive the child table, leaf ancestor table and box heights from the per-cube records."""
        level = np.asarray(level, dtype=np.int64)
        parent = np.asarray(parent, dtype=np.int64)
        diam_est = np.asarray(diam_est, dtype=float)
        size = level.size
        offsets = np.searchsorted(level, np.arange(1, depth + 2)).tolist()

        has_parent = np.flatnonzero(parent >= 0)
        child_counts = np.bincount(parent[has_parent], minlength=size)
        width = max(1, int(child_counts.max()) if size else 1)
        children_pad = np.full((size, width), -1, dtype=np.int64)
        order = has_parent[np.argsort(parent[has_parent], kind="stable")]
        starts = np.concatenate([[0], np.cumsum(child_counts)[:-1]])
        slots = np.arange(order.size) - starts[parent[order]]
        children_pad[parent[order], slots] = order

        leaves = np.arange(offsets[depth - 1], offsets[depth])
        leaf_ancestors = np.empty((leaves.size, depth), dtype=np.int64)
        leaf_ancestors[:, depth - 1] = leaves
        for k in range(depth - 1, 0, -1):
            leaf_ancestors[:, k - 1] = parent[leaf_ancestors[:, k]]

        return cls(
            n=n,
            eta=eta,
            kappa0_target=kappa0_target,
            kappa1_target=kappa1_target,
            depth=depth,
            seed=seed,
            system_index=system_index,
            rotation=np.eye(n) if rotation is None else np.asarray(rotation, dtype=float),
            centers=np.asarray(centers, dtype=float),
            level=level,
            parent=parent,
            diam_est=diam_est,
            box_height=np.minimum(1.0, diam_est / 2.0),
            children_pad=children_pad,
            leaf_ancestors=leaf_ancestors,
            level_offsets=offsets,
            realized_kappa0=list(realized_kappa0 or []),
            realized_kappa1=list(realized_kappa1 or []),
        )

    @property
    def size(self) -> int:
        return int(self.level.size)

    def ids_at(self, level: int) -> np.ndarray:
        return np.arange(self.level_offsets[level - 1], self.level_offsets[level])

    def count(self, level: int) -> int:
        return self.level_offsets[level] - self.level_offsets[level - 1]

    @property
    def realized_kappa0_min(self) -> float:
        return min(self.realized_kappa0) if self.realized_kappa0 else float("nan")

    @property
    def realized_kappa1_max(self) -> float:
        return max(self.realized_kappa1) if self.realized_kappa1 else float("nan")

    def descend(self, points: np.ndarray, chunk: int = 65536) -> np.ndarray:
        """
        Locate the directions of points by hierarchical nearest-center descent.

        Args:
            points: array of shape (m, n); only directions matter, rows must be nonzero
            chunk: rows processed per block

        Returns:
            Integer array of shape (m, depth) with the level-k cube id in column k-1
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        total = pts.shape[0]
        path = np.empty((total, self.depth), dtype=np.int64)
        top = self.ids_at(1)
        top_centers = self.centers[top]
        for start in range(0, total, chunk):
            block = pts[start:start + chunk]
            rows = np.arange(block.shape[0])
            current = top[np.argmax(block @ top_centers.T, axis=1)]
            path[start:start + block.shape[0], 0] = current
            for k in range(1, self.depth):
                candidates = self.children_pad[current]
                valid = candidates >= 0
                dots = np.einsum("bcn,bn->bc", self.centers[np.where(valid, candidates, 0)], block)
                dots[~valid] = -np.inf
                current = candidates[rows, np.argmax(dots, axis=1)]
                path[start:start + block.shape[0], k] = current
        return path

    def cube(self, cube_id: int) -> DyadicCube:
        """Record view of one cube."""
        lvl = int(self.level[cube_id])
        children = self.children_pad[cube_id]
        view = DyadicCube(
            id=int(cube_id),
            level=lvl,
            index=int(cube_id - self.level_offsets[lvl - 1]),
            center=SpherePoint(coords=self.centers[cube_id]),
            parent=int(self.parent[cube_id]) if self.parent[cube_id] >= 0 else None,
            children=[int(c) for c in children[children >= 0]],
            diam_est=float(self.diam_est[cube_id]),
            box_height=float(self.box_height[cube_id]),
        )
        view._system = self
        return view

    def to_dict(self) -> Dict:
        """Versioned per-cube records; enough to rebuild the system exactly."""
        return {
            "format_version": FORMAT_VERSION,
            "params": {
                "n": self.n,
                "eta": self.eta,
                "depth": self.depth,
                "kappa0_target": self.kappa0_target,
                "kappa1_target": self.kappa1_target,
                "system_index": self.system_index,
            },
            "seed": self.seed,
            "rotation": self.rotation.tolist(),
            "realized_kappa0": self.realized_kappa0,
            "realized_kappa1": self.realized_kappa1,
            "cubes": [
                {
                    "id": int(i),
                    "level": int(self.level[i]),
                    "parent": int(self.parent[i]),
                    "center": self.centers[i].tolist(),
                    "diam_est": float(self.diam_est[i]),
                }
                for i in range(self.size)
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "DyadicSystem":
        version = payload.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported dyadic system format version: {version}")
        params = payload["params"]
        cubes = payload["cubes"]
        return cls.assemble(
            n=params["n"],
            eta=params["eta"],
            depth=params["depth"],
            seed=payload["seed"],
            centers=np.array([c["center"] for c in cubes], dtype=float),
            level=np.array([c["level"] for c in cubes]),
            parent=np.array([c["parent"] for c in cubes]),
            diam_est=np.array([c["diam_est"] for c in cubes], dtype=float),
            rotation=np.array(payload["rotation"], dtype=float),
            system_index=params.get("system_index", 0),
            realized_kappa0=payload.get("realized_kappa0"),
            realized_kappa1=payload.get("realized_kappa1"),
            kappa0_target=params.get("kappa0_target", REFERENCE_TRIPLE[1]),
            kappa1_target=params.get("kappa1_target", REFERENCE_TRIPLE[2]),
        )


class CoverReport(BaseModel):
    """Outcome of the cap-coverage scan behind the constant C3."""
    caps_tested: int
    caps_covered: int
    caps_flagged: int = 0  # uncovered caps at or above the coarse scale
    cover_constant: float
    worst_cap: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict:
        return self.dict()


class AdjacentFamily(BaseModel):
    """N dyadic systems built from rotated copies of one point set."""
    systems: List[DyadicSystem]
    cover_constant: float = float("nan")
    cover: Optional[CoverReport] = None

    class Config:
        arbitrary_types_allowed = True

    @property
    def N(self) -> int:
        return len(self.systems)

    @property
    def n(self) -> int:
        return self.systems[0].n

    @property
    def depth(self) -> int:
        return self.systems[0].depth

    @property
    def eta(self) -> float:
        return self.systems[0].eta

    def to_dict(self) -> Dict:
        return {
            "format_version": FORMAT_VERSION,
            "cover_constant": self.cover_constant,
            "cover": self.cover.to_dict() if self.cover else None,
            "systems": [s.to_dict() for s in self.systems],
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "AdjacentFamily":
        cover = payload.get("cover")
        return cls(
            systems=[DyadicSystem.from_dict(s) for s in payload["systems"]],
            cover_constant=payload.get("cover_constant", float("nan")),
            cover=CoverReport(**cover) if cover else None,
        )
