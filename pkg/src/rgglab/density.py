"""Radial probability densities on R^d and their measure calculus.

Two families share one contract: a strictly positive, non-increasing radial
profile q(rho) integrating to one over R^d.

* ``HeavyTail(alpha)``   -- power law  q(rho) = C / (1 + rho^alpha), alpha > d.
* ``LightTail(v, scale)`` -- stretched exponential q(rho) = C exp(-(rho/scale)^v).

The light-tail shape exponent v splits the decay classes: v in (0,1) is
subexponential, v = 1 exponential, v > 1 superexponential (v = 2 is the
Gaussian). The shape calculus (psi, psi_prime, psi_inverse) is defined for
light tails only.

Measures of tails, balls and cubes are adaptive quadratures against the
profile; the closed-form radial CDF (incomplete gamma/beta) backs the
inverse-CDF sampling table and serves as an independent cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

__all__ = [
    "NumericFailure",
    "HeavyTail",
    "LightTail",
    "DensitySpec",
    "RadialMeasure",
    "sphere_surface_area",
    "ball_volume",
    "gaussian_spec",
    "heavy_tail_spec",
    "light_tail_spec",
    "eval_density",
    "psi",
    "psi_prime",
    "psi_inverse",
    "invert_monotone",
    "radial_cdf",
    "radial_tail",
    "tail_mass",
    "ball_mass",
    "cube_mass",
    "radial_measure",
]

# Absolute tolerance for the measure quadratures (tail_mass / ball_mass).
QUAD_ABS_TOL = 1e-10
# Maximum process intensity the sampling table is sized for; the truncated
# tail mass beyond the table is kept below 1e-10 / MAX_INTENSITY.
MAX_INTENSITY = 1.0e7
TABLE_SIZE = 8192


class NumericFailure(RuntimeError):
    """An adaptive quadrature or root search failed to converge."""


def sphere_surface_area(dimension: int) -> float:
    """Surface measure of the unit sphere S^{d-1} in R^d (2*pi for d=2)."""
    return 2.0 * math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0)


def ball_volume(dimension: int) -> float:
    """Lebesgue volume of the unit ball in R^d (pi for d=2)."""
    return math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0 + 1.0)


@dataclass(frozen=True)
class HeavyTail:
    """Power-law family: radial profile C / (1 + rho^alpha)."""

    alpha: float


@dataclass(frozen=True)
class LightTail:
    """Stretched-exponential family: radial profile C exp(-(rho/scale)^v)."""

    v: float
    scale: float = 1.0


@dataclass(frozen=True)
class DensitySpec:
    """A normalized radial density on R^d.

    The normalizing constant is computed in closed form at construction:

    * heavy:  C = alpha * sin(pi d / alpha) / (s_{d-1} * pi)
    * light:  C = v / (s_{d-1} * scale^d * Gamma(d / v))

    and the tests verify by quadrature that the density integrates to one.
    """

    dimension: int
    family: HeavyTail | LightTail
    norm_constant: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        d = self.dimension
        if not isinstance(d, (int, np.integer)) or d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {d!r}")
        fam = self.family
        if isinstance(fam, HeavyTail):
            if not (math.isfinite(fam.alpha) and fam.alpha > d):
                raise ValueError(f"heavy tail requires alpha > dimension, got alpha={fam.alpha}")
            c = fam.alpha * math.sin(math.pi * d / fam.alpha) / (sphere_surface_area(d) * math.pi)
        elif isinstance(fam, LightTail):
            if not (math.isfinite(fam.v) and fam.v > 0):
                raise ValueError(f"light tail requires v > 0, got v={fam.v}")
            if not (math.isfinite(fam.scale) and fam.scale > 0):
                raise ValueError(f"light tail requires scale > 0, got scale={fam.scale}")
            c = fam.v / (sphere_surface_area(d) * fam.scale**d * math.gamma(d / fam.v))
        else:
            raise TypeError(f"family must be HeavyTail or LightTail, got {type(fam).__name__}")
        object.__setattr__(self, "dimension", int(d))
        object.__setattr__(self, "norm_constant", float(c))

    @property
    def is_light(self) -> bool:
        return isinstance(self.family, LightTail)

    def to_json(self) -> dict:
        if isinstance(self.family, HeavyTail):
            fam = {"heavy_tail": {"alpha": self.family.alpha}}
        else:
            fam = {"light_tail": {"v": self.family.v, "scale": self.family.scale}}
        return {"dimension": self.dimension, "family": fam}

    @staticmethod
    def from_json(data: dict) -> "DensitySpec":
        dimension = int(data.get("dimension", 2))
        fam = data["family"]
        if "heavy_tail" in fam:
            return DensitySpec(dimension, HeavyTail(float(fam["heavy_tail"]["alpha"])))
        if "light_tail" in fam:
            lt = fam["light_tail"]
            return DensitySpec(dimension, LightTail(float(lt["v"]), float(lt.get("scale", 1.0))))
        raise ValueError(f"unknown density family keys: {sorted(fam)}")


def gaussian_spec(dimension: int = 2, scale: float = 1.0) -> DensitySpec:
    return DensitySpec(dimension, LightTail(2.0, scale))


def heavy_tail_spec(dimension: int, alpha: float) -> DensitySpec:
    return DensitySpec(dimension, HeavyTail(alpha))


def light_tail_spec(dimension: int, v: float, scale: float = 1.0) -> DensitySpec:
    return DensitySpec(dimension, LightTail(v, scale))


# ---------------------------------------------------------------------------
# Radial profile and shape calculus
# ---------------------------------------------------------------------------


def eval_density(spec: DensitySpec, radius):
    """Radial profile q(radius); strictly positive, non-increasing.

    Accepts a scalar or an ndarray of radii.
    """
    rho = np.asarray(radius, dtype=float)
    if rho.ndim == 0 and not math.isfinite(float(rho)):
        raise ValueError(f"radius must be finite, got {radius!r}")
    fam = spec.family
    if isinstance(fam, HeavyTail):
        out = spec.norm_constant / (1.0 + rho**fam.alpha)
    else:
        out = spec.norm_constant * np.exp(-((rho / fam.scale) ** fam.v))
    return float(out) if out.ndim == 0 else out


def _require_light(spec: DensitySpec, op: str) -> LightTail:
    if not isinstance(spec.family, LightTail):
        raise ValueError(f"{op} is defined for light-tail densities only")
    return spec.family


def psi(spec: DensitySpec, z):
    """Shape exponent of the log-density: psi(z) = (z/scale)^v."""
    fam = _require_light(spec, "psi")
    z = np.asarray(z, dtype=float)
    out = (z / fam.scale) ** fam.v
    return float(out) if out.ndim == 0 else out


def psi_prime(spec: DensitySpec, z):
    """Derivative of the shape exponent: (v/scale) * (z/scale)^(v-1)."""
    fam = _require_light(spec, "psi_prime")
    z = np.asarray(z, dtype=float)
    out = (fam.v / fam.scale) * (z / fam.scale) ** (fam.v - 1.0)
    return float(out) if out.ndim == 0 else out


def psi_inverse(spec: DensitySpec, y):
    """Exact inverse of the shape exponent: scale * y^(1/v). Requires y > 0."""
    fam = _require_light(spec, "psi_inverse")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("psi_inverse requires a positive argument")
    out = fam.scale * y ** (1.0 / fam.v)
    return float(out) if out.ndim == 0 else out


def invert_monotone(
    fn: Callable[[float], float],
    target: float,
    lo: float = 0.0,
    hi: float | None = None,
    rel_tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Invert an increasing function by bracketing + bisection.

    Fallback inverse for any future monotone shape function; the power family
    uses the closed form. Converges to ``rel_tol`` relative on the argument.
    """
    flo = fn(lo)
    if flo > target:
        raise ValueError(f"target {target} below fn({lo}) = {flo}")
    if hi is None:
        hi = max(1.0, 2.0 * lo)
        for _ in range(max_iter):
            if fn(hi) >= target:
                break
            hi *= 2.0
        else:
            raise NumericFailure("could not bracket the target value")
    for _ in range(max_iter):
        if hi - lo <= rel_tol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    else:
        raise NumericFailure("bisection failed to converge")
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Closed-form radial CDF (sampling-table backend and cross-check)
# ---------------------------------------------------------------------------


def radial_cdf(spec: DensitySpec, rho):
    """P(|X| <= rho) in closed form (regularized incomplete gamma/beta).

    Backs the inverse-CDF sampling table and the distributional tests; the
    quadrature route ``tail_mass`` is validated against it.
    """
    rho = np.asarray(rho, dtype=float)
    d = spec.dimension
    fam = spec.family
    if isinstance(fam, LightTail):
        out = special.gammainc(d / fam.v, (rho / fam.scale) ** fam.v)
    else:
        a = fam.alpha
        with np.errstate(over="ignore"):
            ra = rho**a
        # Split at the median of rho^a/(1+rho^a): the lower half is computed
        # directly, the upper half through the complement, which stays accurate
        # when 1/(1+rho^a) is far below machine epsilon.
        x = np.where(np.isfinite(ra), ra / (1.0 + ra), 1.0)
        xc = np.where(np.isfinite(ra), 1.0 / (1.0 + ra), 0.0)
        out = np.where(
            x <= 0.5,
            special.betainc(d / a, 1.0 - d / a, np.minimum(x, 0.5)),
            1.0 - special.betainc(1.0 - d / a, d / a, np.minimum(xc, 0.5)),
        )
    return float(out) if out.ndim == 0 else out


def radial_tail(spec: DensitySpec, rho):
    """P(|X| > rho) in closed form, accurate deep into the tail."""
    rho = np.asarray(rho, dtype=float)
    d = spec.dimension
    fam = spec.family
    if isinstance(fam, LightTail):
        out = special.gammaincc(d / fam.v, (rho / fam.scale) ** fam.v)
    else:
        a = fam.alpha
        with np.errstate(over="ignore"):
            ra = rho**a
        x = np.where(np.isfinite(ra), 1.0 / (1.0 + ra), 0.0)
        out = special.betainc(1.0 - d / a, d / a, x)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Measure quadratures
# ---------------------------------------------------------------------------


def _radial_pdf(spec: DensitySpec, rho):
    """Radius marginal s_{d-1} rho^{d-1} q(rho)."""
    d = spec.dimension
    return sphere_surface_area(d) * np.asarray(rho, dtype=float) ** (d - 1) * eval_density(spec, rho)


def _quad(fn, lo, hi, points=None, accept_abs: float = 1e-8, accept_rel: float = 1e-6) -> float:
    """Adaptive quadrature targeting QUAD_ABS_TOL absolute.

    QUADPACK may flag roundoff near integrand kinks while its error estimate
    is still tight; such results are accepted as long as the estimate stays
    within accept_abs or accept_rel * |value|. Anything worse is the
    pathological-input case and raises NumericFailure.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(
            fn, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-10, limit=300, points=points
        )
    if not math.isfinite(val):
        raise NumericFailure(f"quadrature returned a non-finite value {val}")
    trouble = [w for w in caught if issubclass(w.category, integrate.IntegrationWarning)]
    if trouble and err > max(accept_abs, accept_rel * abs(val)):
        raise NumericFailure(
            f"quadrature did not converge (error estimate {err:.2e}): {trouble[0].message}"
        )
    return val


def tail_mass(spec: DensitySpec, R: float) -> float:
    """Mass outside the ball of radius R: s_{d-1} * int_R^inf rho^{d-1} q(rho) drho.

    Adaptive quadrature, absolute tolerance 1e-10.
    """
    if R < 0:
        raise ValueError(f"R must be >= 0, got {R}")
    val = _quad(lambda rho: _radial_pdf(spec, rho), R, np.inf)
    return min(1.0, max(0.0, val))


def _sin_power_integral(m: int, theta: float) -> float:
    """int_0^theta sin(u)^m du for theta in [0, pi], via the incomplete beta."""
    if theta <= 0.0:
        return 0.0
    half = 0.5 * special.beta((m + 1) / 2.0, 0.5)
    if theta >= math.pi:
        return 2.0 * half
    if theta <= 0.5 * math.pi:
        s2 = math.sin(theta) ** 2
        return half * float(special.betainc((m + 1) / 2.0, 0.5, s2))
    return 2.0 * half - _sin_power_integral(m, math.pi - theta)


def _cap_area(dimension: int, theta: float) -> float:
    """Surface measure on S^{d-1} of the cap with half-angle theta."""
    s_sub = 2.0 * math.pi ** ((dimension - 1) / 2.0) / math.gamma((dimension - 1) / 2.0)
    return s_sub * _sin_power_integral(dimension - 2, theta)


def ball_mass(spec: DensitySpec, center_radius: float, r: float) -> float:
    """Mass of a ball B(y, r) with |y| = center_radius (rotationally invariant).

    Spherical-cap reduction: integrate over the concentric shell radius t the
    profile value times the cap area the shell subtends inside the ball; a
    shell entirely inside the ball contributes the full sphere. The
    concentric case center_radius = 0 reduces to 1 - tail_mass(r).
    """
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    if center_radius < 0:
        raise ValueError(f"center_radius must be >= 0, got {center_radius}")
    rho = float(center_radius)
    if rho == 0.0:
        return min(1.0, max(0.0, 1.0 - tail_mass(spec, r)))
    d = spec.dimension
    s_full = sphere_surface_area(d)
    r2 = r * r
    rho2 = rho * rho

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t <= r - rho:
            cap = s_full
        else:
            c = (t * t + rho2 - r2) / (2.0 * t * rho)
            c = min(1.0, max(-1.0, c))
            cap = _cap_area(d, math.acos(c))
        return eval_density(spec, t) * t ** (d - 1) * cap

    lo = max(0.0, rho - r)
    hi = rho + r
    points = [r - rho] if lo < r - rho < hi else None
    val = _quad(integrand, lo, hi, points=points)
    return min(1.0, max(0.0, val))


def cube_mass(spec: DensitySpec, lower, upper) -> float:
    """Mass of an axis-aligned box via tensor-product Gauss-Legendre (order 8).

    Refines by halving every axis until successive estimates agree to 1e-9
    relative or 1e-14 absolute.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = spec.dimension
    if lower.shape != (d,) or upper.shape != (d,):
        raise ValueError(f"cube bounds must be length-{d} vectors")
    if not np.all(upper > lower):
        raise ValueError("cube is degenerate: need upper > lower on every axis")

    nodes, weights = np.polynomial.legendre.leggauss(8)

    def estimate(level: int) -> float:
        panels = 2**level
        axis_nodes = []
        axis_weights = []
        for k in range(d):
            edges = np.linspace(lower[k], upper[k], panels + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * (edges[1] - edges[0])
            axis_nodes.append((mid[:, None] + half * nodes[None, :]).ravel())
            axis_weights.append(np.tile(half * weights, panels))
        mesh = np.meshgrid(*axis_nodes, indexing="ij")
        radii = np.sqrt(sum(m * m for m in mesh))
        vals = eval_density(spec, radii)
        for w in reversed(axis_weights):
            vals = np.tensordot(vals, w, axes=([vals.ndim - 1], [0]))
        return float(vals)

    # Keep the tensor mesh below ~4e6 points per estimate.
    max_level = 0
    while (8 * 2 ** (max_level + 1)) ** d <= 4_200_000:
        max_level += 1
    prev = estimate(0)
    for level in range(1, max_level + 1):
        cur = estimate(level)
        if abs(cur - prev) <= max(1e-9 * abs(cur), 1e-14):
            return min(1.0, max(0.0, cur))
        prev = cur
    raise NumericFailure(
        f"cube quadrature did not converge within {max_level} refinements"
    )


# ---------------------------------------------------------------------------
# Inverse-CDF sampling table
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialMeasure:
    """Tabulated radial CDF of a spec, for inverse-CDF sampling.

    ``cdf_table`` is a strictly increasing (radius, cumulative mass) grid whose
    final entry pins the truncation radius; the mass beyond it
    (``truncated_mass``) is below 1e-10 / MAX_INTENSITY.
    """

    spec: DensitySpec
    truncation_radius: float
    truncated_mass: float
    cdf_table: np.ndarray  # shape (K, 2): radius, cumulative mass

    def quantile(self, u) -> np.ndarray:
        """Radii at which the radial CDF equals u (vectorized).

        Table lookup for the bracket, then bisection against the closed-form
        CDF to 1e-12 relative on the radius.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        radii = self.cdf_table[:, 0]
        cum = self.cdf_table[:, 1]
        idx = np.clip(np.searchsorted(cum, u, side="right"), 1, len(cum) - 1)
        lo = radii[idx - 1].copy()
        hi = radii[idx].copy()
        spec = self.spec
        for _ in range(80):
            active = (hi - lo) > 1e-12 * hi
            if not active.any():
                break
            mid = 0.5 * (lo[active] + hi[active])
            below = radial_cdf(spec, mid) < u[active]
            new_lo = np.where(below, mid, lo[active])
            new_hi = np.where(below, hi[active], mid)
            lo[active] = new_lo
            hi[active] = new_hi
        return 0.5 * (lo + hi)


def _build_radial_measure(spec: DensitySpec) -> RadialMeasure:
    target = 1e-10 / MAX_INTENSITY
    hi = 1.0
    for _ in range(4000):
        if radial_tail(spec, hi) < target:
            break
        hi *= 2.0
    else:
        raise NumericFailure("could not locate the truncation radius")
    # Refine the truncation radius downward a little (keeps the table tight).
    lo = hi / 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if radial_tail(spec, mid) < target:
            hi = mid
        else:
            lo = mid
    truncation_radius = hi
    truncated = float(radial_tail(spec, truncation_radius))

    u_grid = np.linspace(0.0, 1.0, TABLE_SIZE + 1)[:-1]  # final entry pinned below
    lo_r = np.zeros_like(u_grid)
    hi_r = np.full_like(u_grid, truncation_radius)
    for _ in range(90):
        active = (hi_r - lo_r) > 1e-13 * np.maximum(hi_r, 1e-300)
        if not active.any():
            break
        mid = 0.5 * (lo_r[active] + hi_r[active])
        below = radial_cdf(spec, mid) < u_grid[active]
        lo_r[active] = np.where(below, mid, lo_r[active])
        hi_r[active] = np.where(below, hi_r[active], mid)
    radii = 0.5 * (lo_r + hi_r)
    radii[0] = 0.0
    table = np.empty((TABLE_SIZE + 1, 2))
    table[:-1, 0] = radii
    table[:-1, 1] = u_grid
    table[-1] = (truncation_radius, 1.0)
    if not (np.all(np.diff(table[:, 0]) > 0) and np.all(np.diff(table[:, 1]) > 0)):
        raise NumericFailure("sampling table is not strictly increasing")
    table.setflags(write=False)
    return RadialMeasure(spec, truncation_radius, truncated, table)


@lru_cache(maxsize=64)
def radial_measure(spec: DensitySpec) -> RadialMeasure:
    """Cached sampling table for a spec (built once, immutable)."""
    return _build_radial_measure(spec)
