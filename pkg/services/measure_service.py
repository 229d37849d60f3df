"""
Measure Service for the ProjectCarleson system.
Normalizing constants of nu_alpha, normalized cap measure on the sphere,
radial integrals and Carleson-box measures, plus an exact sampler of nu_alpha.
"""
import logging
import math
from functools import lru_cache
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special

from models.errors import EmptyBox, InvalidAlpha, PreconditionViolation
from models.geometry import CapBall, CarlesonBox
from models.measure import AlphaContext, AreaBounds, DoublingProfile, MeasureMethod, MeasureValue
from models.weights import Weight
from .geometry_service import random_sphere_points

# Initialize logging
logger = logging.getLogger(__name__)

QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200
MC_BUDGET = 100_000


@lru_cache(maxsize=64)
def make_alpha_context(n: int, alpha: float) -> AlphaContext:
    """
    Build the normalizing constant of d nu_alpha = c_alpha (1-|x|^2)^alpha d nu.

    The radial integral n * int_0^1 t^(n-1) (1-t^2)^alpha dt is computed by
    adaptive quadrature with the algebraic endpoint weight (1-t)^alpha, so
    alpha in (-1, 0) needs no special treatment.

    Raises:
        InvalidAlpha: if alpha <= -1
    """
    if n < 3:
        raise PreconditionViolation(f"n must be at least 3, got {n}")
    if not alpha > -1.0:
        raise InvalidAlpha(f"alpha must exceed -1, got {alpha}")
    value, _ = integrate.quad(lambda t: t ** (n - 1) * (1.0 + t) ** alpha, 0.0, 1.0,
                              weight="alg", wvar=(0.0, alpha), epsabs=0.0, epsrel=QUAD_EPSREL,
                              limit=QUAD_LIMIT)
    ctx = AlphaContext(n=n, alpha=float(alpha), c_alpha=1.0 / (n * value))
    logger.debug(f"c_alpha for n={n}, alpha={alpha}: {ctx.c_alpha:.15g}")
    return ctx


def total_mass(ctx: AlphaContext) -> float:
    """nu_alpha(B_n) from the closed form n/2 B(n/2, alpha+1); equals 1 up to rounding."""
    return ctx.c_alpha * radial_tail_mass(1.0, ctx.alpha, ctx.n)


def cap_sigma(r: float, n: int) -> float:
    """Normalized surface measure of a geodesic cap of radius r on the sphere in R^n."""
    if not (0.0 < r <= math.pi):
        raise PreconditionViolation(f"cap radius must lie in (0, pi], got {r}")
    if r == math.pi:
        return 1.0
    num, _ = integrate.quad(lambda t: math.sin(t) ** (n - 2), 0.0, r, epsabs=0.0, epsrel=QUAD_EPSREL)
    den, _ = integrate.quad(lambda t: math.sin(t) ** (n - 2), 0.0, math.pi, epsabs=0.0, epsrel=QUAD_EPSREL)
    return num / den


def cap_sigma_many(r: Union[float, np.ndarray], n: int) -> np.ndarray:
    """Vectorized cap measure through the regularized incomplete beta function."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, math.pi)
    a = (n - 1) / 2.0
    half = 0.5 * special.betainc(a, 0.5, np.sin(r) ** 2)
    return np.where(r <= math.pi / 2.0, half, 1.0 - half)


def radial_tail_mass(h: Union[float, np.ndarray], beta: float, n: int) -> np.ndarray:
    """
    n * int_{1-h}^1 t^(n-1) (1-t^2)^beta dt in closed form.

    Equals (n/2) B(n/2, beta+1) I_{h(2-h)}(beta+1, n/2), finite for beta > -1.
    """
    if not beta > -1.0:
        raise PreconditionViolation(f"radial exponent must exceed -1, got {beta}")
    h = np.clip(np.asarray(h, dtype=float), 0.0, 1.0)
    return 0.5 * n * special.beta(n / 2.0, beta + 1.0) * special.betainc(beta + 1.0, n / 2.0, h * (2.0 - h))


def weighted_radial_mass(h: float, ctx: AlphaContext, weight: Optional[Weight] = None) -> MeasureValue:
    """
    The omega d nu_alpha mass of the annulus {1-h < |x| < 1} for a radial weight.

    Power weights use the incomplete beta closed form; other radial profiles
    use adaptive quadrature with the (1-t)^alpha endpoint weight.
    """
    if h <= 0.0:
        raise EmptyBox(f"box height must be positive, got {h}")
    h = min(float(h), 1.0)
    n, alpha = ctx.n, ctx.alpha
    if weight is None or weight.is_unit:
        return MeasureValue(value=float(ctx.c_alpha * radial_tail_mass(h, alpha, n)))
    if not weight.is_radial:
        raise PreconditionViolation(f"weight {weight.label} is not radial")
    if weight.is_power and weight.evaluator is None:
        beta = alpha + weight.exponent
        if not beta > -1.0:
            raise PreconditionViolation(f"(1-|x|^2)^{weight.exponent:g} is not nu_alpha integrable")
        return MeasureValue(value=float(weight.scale * ctx.c_alpha * radial_tail_mass(h, beta, n)))
    value, error = integrate.quad(lambda t: t ** (n - 1) * (1.0 + t) ** alpha * float(weight.radial(t)),
                                  1.0 - h, 1.0, weight="alg", wvar=(0.0, alpha),
                                  epsabs=0.0, epsrel=1e-10, limit=QUAD_LIMIT)
    scale = n * ctx.c_alpha
    return MeasureValue(value=max(scale * value, 0.0), abs_error=scale * error)


class AlphaSampler:
    """
    Exact sampler of nu_alpha and of its restrictions to Carleson boxes over caps.

    With s = 1 - |x|^2, s follows Beta(alpha+1, n/2); s is drawn by
    betaincinv so points near the boundary keep full relative precision in s.
    """

    def __init__(self, ctx: AlphaContext):
        logger.info(f"Initializing Alpha Sampler (n={ctx.n}, alpha={ctx.alpha:g})")
        self.ctx = ctx
        self.a = ctx.alpha + 1.0
        self.b = ctx.n / 2.0

    def one_minus_sq(self, m: int, rng: np.random.Generator, height: float = 1.0) -> np.ndarray:
        """Draw s = 1 - |x|^2 conditioned on 1 - height < |x| < 1."""
        upper = 1.0 if height >= 1.0 else float(special.betainc(self.a, self.b, height * (2.0 - height)))
        v = rng.random(m) * upper
        s = special.betaincinv(self.a, self.b, v)
        # keep the open-ball invariant when v underflows to 0
        return np.clip(s, np.finfo(float).tiny, 1.0)

    def sample(self, m: int, rng: np.random.Generator, height: float = 1.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Draw m points of nu_alpha (restricted to the annulus of the given height).

        Returns:
            (points, modulus, one_minus_sq)
        """
        directions = random_sphere_points(m, self.ctx.n, rng)
        s = self.one_minus_sq(m, rng, height)
        modulus = np.sqrt(1.0 - s)
        return directions * modulus[:, None], modulus, s

    def cap_directions(self, cap: CapBall, m: int, rng: np.random.Generator) -> np.ndarray:
        """Directions uniform on the cap, by inverting the polar-angle distribution."""
        n = self.ctx.n
        a = (n - 1) / 2.0
        q = rng.random(m) * float(cap_sigma_many(cap.radius, n))
        lower = q <= 0.5
        sin_sq = special.betaincinv(a, 0.5, np.where(lower, 2.0 * q, 2.0 * (1.0 - q)))
        theta = np.arcsin(np.sqrt(np.clip(sin_sq, 0.0, 1.0)))
        theta = np.where(lower, theta, math.pi - theta)
        center = cap.center.coords
        tangent = rng.standard_normal((m, n))
        tangent -= np.outer(tangent @ center, center)
        tangent /= np.linalg.norm(tangent, axis=1)[:, None]
        return np.cos(theta)[:, None] * center[None, :] + np.sin(theta)[:, None] * tangent

    def sample_box(self, box: CarlesonBox, m: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """nu_alpha restricted to a cap box: exact cap directions times the conditioned radius."""
        if not box.is_cap_box():
            raise PreconditionViolation("sample_box needs a cap base")
        directions = self.cap_directions(box.base, m, rng)
        s = self.one_minus_sq(m, rng, box.height)
        modulus = np.sqrt(1.0 - s)
        return directions * modulus[:, None], modulus, s


def box_measure(box: CarlesonBox, weight: Optional[Weight], ctx: AlphaContext,
                budget: int = MC_BUDGET, rng: Optional[np.random.Generator] = None) -> MeasureValue:
    """
    |box|_{omega,alpha}, the omega d nu_alpha measure of a Carleson box.

    Radial weights over cap bases factor as sigma(base) times the annulus
    mass and go through quadrature. General weights and dyadic-cube bases use
    Monte Carlo with the standard error reported.

    Args:
        box: Carleson box over a CapBall or a DyadicCube
        weight: the weight, or None for omega = 1
        ctx: alpha context
        budget: Monte Carlo sample count
        rng: generator for the Monte Carlo path

    Returns:
        MeasureValue with value and error bar
    """
    if box.height <= 0.0:
        raise EmptyBox(f"box height must be positive, got {box.height}")
    radial = weight is None or weight.is_radial
    if box.is_cap_box() and radial:
        annulus = weighted_radial_mass(box.height, ctx, weight)
        sigma = cap_sigma(box.base.radius, ctx.n) if box.base.radius < math.pi else 1.0
        return MeasureValue(value=sigma * annulus.value, abs_error=sigma * annulus.abs_error)

    rng = rng if rng is not None else np.random.default_rng(0)
    sampler = AlphaSampler(ctx)
    annulus = float(ctx.c_alpha * radial_tail_mass(box.height, ctx.alpha, ctx.n))
    if box.is_cap_box():
        sigma = float(cap_sigma_many(box.base.radius, ctx.n))
        points, modulus, s = sampler.sample_box(box, budget, rng)
        values = _weight_values(weight, points, modulus, s)
        scale = sigma * annulus
    else:
        points, modulus, s = sampler.sample(budget, rng, box.height)
        inside = box.base.contains_directions(points)
        values = np.where(inside, _weight_values(weight, points, modulus, s), 0.0)
        scale = annulus
    mean = float(values.mean())
    error = float(values.std(ddof=1) / math.sqrt(budget)) if budget > 1 else float("inf")
    return MeasureValue(value=max(scale * mean, 0.0), abs_error=scale * error,
                        method=MeasureMethod.MONTE_CARLO, samples=budget)


def _weight_values(weight: Optional[Weight], points: np.ndarray, modulus: np.ndarray, s: np.ndarray) -> np.ndarray:
    if weight is None:
        return np.ones(points.shape[0])
    return weight.evaluate_on(modulus, s, points)


def area_ratio(ctx: AlphaContext, radii: Union[float, np.ndarray]) -> np.ndarray:
    """|B^_rho(x,r)|_alpha divided by (c_alpha/(alpha+1)) r^(n+alpha) (2-r)^(alpha+1)."""
    r = np.asarray(radii, dtype=float)
    n, alpha = ctx.n, ctx.alpha
    measure = cap_sigma_many(r, n) * ctx.c_alpha * radial_tail_mass(np.minimum(r, 1.0), alpha, n)
    scale = ctx.c_alpha / (alpha + 1.0) * r ** (n + alpha) * (2.0 - r) ** (alpha + 1.0)
    return measure / scale


def area_bound_constants(ctx: AlphaContext, grid_size: int = 4000) -> AreaBounds:
    """
    Two-sided constants for the box-measure comparison with r^(n+alpha)(2-r)^(alpha+1).

    c1 and c2 are the realized inf and sup over r in (0, 1] of
    sigma(cap r)/r^(n-1); the sup is attained in the r -> 0 limit
    1 / ((n-1) B((n-1)/2, 1/2)).
    """
    n, alpha = ctx.n, ctx.alpha
    radii = np.logspace(-6, 0, grid_size)
    ratios = cap_sigma_many(radii, n) / radii ** (n - 1)
    limit = 1.0 / ((n - 1) * special.beta((n - 1) / 2.0, 0.5))
    c1 = float(min(ratios.min(), limit))
    c2 = float(max(ratios.max(), limit))
    factor = 0.75 ** (alpha + 1.0)
    bounds = AreaBounds(
        n=n,
        alpha=alpha,
        c1=c1,
        c2=c2,
        C1=n * c1 * factor / 2.0 ** (n - 1),
        C2=n * c2,
        C1_stated=n * c1 * factor / 2.0 ** (n - 2),
    )
    logger.info(f"Area bound constants n={n}, alpha={alpha:g}: C1={bounds.C1:.6g}, C2={bounds.C2:.6g}")
    return bounds


def doubling_limit(alpha: float) -> float:
    """lim_{r->0} g(r) = 1 - 2^-(alpha+1)."""
    return 1.0 - 2.0 ** (-(alpha + 1.0))


def stated_doubling_limit(alpha: float) -> float:
    return 1.0 - 0.5 * 0.75 ** alpha


def doubling_values(ctx: AlphaContext, radii: Iterable[float]) -> np.ndarray:
    r = np.asarray(list(radii), dtype=float)
    full = radial_tail_mass(r, ctx.alpha, ctx.n)
    top = radial_tail_mass(r / 2.0, ctx.alpha, ctx.n)
    return 1.0 - top / full


def doubling_profile(ctx: AlphaContext, radii: Optional[Iterable[float]] = None) -> DoublingProfile:
    """Evaluate g(r) on a grid (default 400 log-spaced radii in [1e-4, 1])."""
    grid = np.logspace(-4, 0, 400) if radii is None else np.asarray(list(radii), dtype=float)
    values = doubling_values(ctx, grid)
    return DoublingProfile(
        n=ctx.n,
        alpha=ctx.alpha,
        radii=grid.tolist(),
        values=values.tolist(),
        limit=doubling_limit(ctx.alpha),
        stated_limit=stated_doubling_limit(ctx.alpha),
        min_value=float(values.min()),
    )


def annulus_masses(ctx: AlphaContext, weight: Optional[Weight], heights: np.ndarray) -> np.ndarray:
    """weighted_radial_mass for an array of heights; power weights stay vectorized."""
    heights = np.minimum(np.asarray(heights, dtype=float), 1.0)
    if weight is None or weight.is_unit:
        return ctx.c_alpha * radial_tail_mass(heights, ctx.alpha, ctx.n)
    if weight.is_power and weight.evaluator is None:
        return weight.scale * ctx.c_alpha * radial_tail_mass(heights, ctx.alpha + weight.exponent, ctx.n)
    unique, inverse = np.unique(heights, return_inverse=True)
    values = np.array([weighted_radial_mass(h, ctx, weight).value for h in unique])
    return values[inverse]
