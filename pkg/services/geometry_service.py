"""
Geometry Service for the ProjectCarleson system.
Pointwise geometry on the unit ball B_n and its boundary sphere: the geodesic
metric, the bracket [x,y], enclosing caps, the nontangential cones Omega_gamma
and the region G, plus the seeded point generators every other service uses.
"""
import logging
import math
import zlib
from typing import Any, Tuple, Union

import numpy as np
from scipy.stats import special_ortho_group

from models.errors import DegenerateRegion, PreconditionViolation, ZeroDirection
from models.geometry import BallPoint, CapBall, CarlesonBox, SpherePoint

# Initialize logging
logger = logging.getLogger(__name__)

PointLike = Union[SpherePoint, BallPoint, np.ndarray, list, tuple]

DEFAULT_GAMMA = 0.4
DEFAULT_R0 = 1.0


def _coords(point: PointLike) -> np.ndarray:
    if isinstance(point, (SpherePoint, BallPoint)):
        return point.coords
    return np.asarray(point, dtype=float)


def rng_stream(seed: int, purpose: str) -> np.random.Generator:
    """
    Independent generator for one purpose of a run.

    Streams are keyed by (seed, crc32(purpose)) so adding a new consumer never
    shifts the numbers an existing consumer sees.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(purpose.encode("utf-8"))]))


def random_sphere_points(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the sphere as normalized Gaussian vectors, shape (m, n)."""
    xyz = rng.standard_normal((m, n))
    norm = np.linalg.norm(xyz, axis=1)
    # a zero Gaussian draw has probability zero; redraw rather than divide by it
    while np.any(norm == 0.0):
        bad = norm == 0.0
        xyz[bad] = rng.standard_normal((int(bad.sum()), n))
        norm = np.linalg.norm(xyz, axis=1)
    return xyz / norm[:, None]


def random_ball_points(m: int, n: int, rng: np.random.Generator, max_modulus: float = 1.0) -> np.ndarray:
    """Uniform points of the ball of radius max_modulus, shape (m, n)."""
    directions = random_sphere_points(m, n, rng)
    radii = max_modulus * rng.random(m) ** (1.0 / n)
    return directions * radii[:, None]


def golden_points(m: int) -> np.ndarray:
    """Golden-section spiral (Fibonacci lattice) on S^2, shape (m, 3)."""
    inc = np.pi * (3.0 - np.sqrt(5.0))
    off = 2.0 / m
    k = np.arange(m)
    phi = k * inc
    y = k * off - 1.0 + off / 2.0
    r = np.sqrt(1.0 - y ** 2)
    return np.column_stack([np.cos(phi) * r, y, np.sin(phi) * r])


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(n)."""
    return special_ortho_group.rvs(n, random_state=rng)


def rho(x: PointLike, y: PointLike) -> float:
    """Geodesic distance arccos<x,y> between the directions of x and y."""
    return float(rho_many(np.atleast_2d(_coords(x)), np.atleast_2d(_coords(y)))[0])


def rho_many(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise geodesic distances; rows are normalized first."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.linalg.norm(x, axis=-1)
    ny = np.linalg.norm(y, axis=-1)
    if np.any(nx == 0.0) or np.any(ny == 0.0):
        raise ZeroDirection("rho needs nonzero vectors")
    dots = np.sum(x * y, axis=-1) / (nx * ny)
    return np.arccos(np.clip(dots, -1.0, 1.0))


def chord_from_rho(r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Euclidean chord length of a geodesic distance r on the unit sphere."""
    return 2.0 * np.sin(np.minimum(r, math.pi) / 2.0)


def rho_from_chord(c: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return 2.0 * np.arcsin(np.clip(np.asarray(c) / 2.0, 0.0, 1.0))


def bracket(x: PointLike, y: PointLike) -> float:
    """[x,y] = sqrt(|x-y|^2 + (1-|x|^2)(1-|y|^2))."""
    return float(bracket_many(np.atleast_2d(_coords(x)), np.atleast_2d(_coords(y)))[0])


def bracket_many(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = np.sum((x - y) ** 2, axis=-1)
    prod = (1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(y * y, axis=-1))
    return np.sqrt(np.maximum(diff + prod, 0.0))


def enclosing_cap_many(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized enclosing caps.

    Rows are swapped so the first point has the larger modulus; the cap is
    centered at its direction with radius max(1 - |smaller|, angle).

    Returns:
        (centers, radii) with centers of shape (m, n)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    mx = np.linalg.norm(x, axis=1)
    my = np.linalg.norm(y, axis=1)
    swap = my > mx
    big = np.where(swap[:, None], y, x)
    small = np.where(swap[:, None], x, y)
    m_big = np.maximum(mx, my)
    m_small = np.minimum(mx, my)
    if np.any(m_big == 0.0):
        raise ZeroDirection("both points are the origin; the enclosing cap has no center")
    centers = big / m_big[:, None]
    theta = np.zeros_like(m_small)
    nonzero = m_small > 0.0
    if np.any(nonzero):
        theta[nonzero] = rho_many(big[nonzero], small[nonzero])
    return centers, np.maximum(1.0 - m_small, theta)


def enclosing_cap(x: PointLike, y: PointLike) -> CapBall:
    """
    Cap B_rho(z, r) whose Carleson box holds both points, with [x,y] >= (2/pi) r when r < 1.

    Raises:
        ZeroDirection: if both points are the origin
        PreconditionViolation: if x == y
    """
    xc = _coords(x)
    yc = _coords(y)
    if np.array_equal(xc, yc):
        raise PreconditionViolation("enclosing_cap needs two distinct points")
    centers, radii = enclosing_cap_many(xc[None, :], yc[None, :])
    return CapBall(center=SpherePoint(coords=centers[0]), radius=float(min(radii[0], math.pi)))


def nontangential_mask(y: np.ndarray, xi: PointLike, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Membership of the rows of y in the truncated cone Omega_gamma(xi)."""
    if gamma <= 0:
        raise PreconditionViolation(f"gamma must be positive, got {gamma}")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi_c = _coords(xi)
    xi_c = xi_c / np.linalg.norm(xi_c)
    t = y @ xi_c
    tangential = np.sum(y * y, axis=1) - t * t
    return (t > 0.0) & (t < 1.0) & (tangential < gamma ** 2 * (1.0 - np.abs(t)) ** 2)


def in_nontangential(y: PointLike, xi: PointLike, gamma: float = DEFAULT_GAMMA) -> bool:
    return bool(nontangential_mask(_coords(y)[None, :], xi, gamma)[0])


def region_G_mask(x: np.ndarray, gamma: float = DEFAULT_GAMMA, r0: float = DEFAULT_R0) -> np.ndarray:
    """Membership of the rows of x in G; the origin has no direction and is outside."""
    if math.pi / 2.0 - r0 <= 0.0:
        raise DegenerateRegion(f"G is empty for r0={r0} (pi/2 - r0 <= 0)")
    if gamma <= 0 or gamma >= 0.5:
        raise PreconditionViolation(f"gamma must lie in (0, 1/2), got {gamma}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    modulus = np.linalg.norm(x, axis=1)
    inside = np.zeros(x.shape[0], dtype=bool)
    nonzero = modulus > 0.0
    if np.any(nonzero):
        angle = np.arccos(np.clip(x[nonzero, 0] / modulus[nonzero], -1.0, 1.0))
        inside[nonzero] = (angle < math.pi / 2.0 - r0) & (modulus[nonzero] < gamma / math.sqrt(1.0 + gamma ** 2))
    return inside


def in_region_G(x: PointLike, gamma: float = DEFAULT_GAMMA, r0: float = DEFAULT_R0) -> bool:
    return bool(region_G_mask(_coords(x)[None, :], gamma, r0)[0])


def cap_contains(cap: CapBall, points: np.ndarray) -> np.ndarray:
    """Whether the directions of the rows of points lie in the open cap."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return rho_many(pts, np.broadcast_to(cap.center.coords, pts.shape)) < cap.radius


def box_contains(box: CarlesonBox, points: np.ndarray, closed: bool = False) -> np.ndarray:
    """
    Membership in a Carleson box over a cap or a dyadic cube.

    With closed=True the radial and angular inequalities are non-strict
    (cap bases only; cube cells carry no boundary).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    modulus = np.linalg.norm(pts, axis=1)
    radial = modulus >= box.inner_radius if closed else modulus > box.inner_radius
    radial &= modulus < 1.0
    result = np.zeros(pts.shape[0], dtype=bool)
    if not np.any(radial & (modulus > 0.0)):
        return result
    candidates = np.flatnonzero(radial & (modulus > 0.0))
    base: Any = box.base
    if isinstance(base, CapBall):
        dist = rho_many(pts[candidates], np.broadcast_to(base.center.coords, pts[candidates].shape))
        angular = dist <= base.radius if closed else dist < base.radius
    else:
        angular = base.contains_directions(pts[candidates])
    result[candidates] = angular
    return result
