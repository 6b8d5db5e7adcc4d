"""Analytic thresholds, expectations and bounds for the graph model.

Everything here is a pure function of a density spec and the scalar
parameters (n, r, gamma). The finite-n stand-ins for asymptotic side
conditions (the o/omega proxies c_lo, c_hi, K_exp and the choice
w(n) = sqrt(log log n)) are explicit, configuration-visible constants and
are echoed verbatim into every report.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate

from rgglab.density import (
    DensitySpec,
    HeavyTail,
    LightTail,
    NumericFailure,
    ball_mass,
    eval_density,
    psi_inverse,
    psi_prime,
    radial_measure,
    sphere_surface_area,
    tail_mass,
)

__all__ = [
    "Regime",
    "Prediction",
    "ThresholdReport",
    "ConcentrationRadii",
    "regime_of",
    "w_sequence",
    "light_tail_radii",
    "heavy_tail_radii",
    "tau",
    "chernoff_h",
    "poisson_tail_bound",
    "expected_isolated",
    "tail_empty_prob",
    "concentration_radii",
    "classify",
]

Regime = Literal["heavy_tail", "subexponential", "exponential", "superexponential"]
Prediction = Literal["disconnected_whp", "concentration_regime", "untheorized"]

# Finite-n proxies for the asymptotic little-o / omega conditions.
DEFAULT_C_LO = 0.5
DEFAULT_C_HI = 2.0
DEFAULT_K_EXP = 1.0

_MIN_N = 16.0  # keeps log log n comfortably positive


def regime_of(spec: DensitySpec) -> Regime:
    if isinstance(spec.family, HeavyTail):
        return "heavy_tail"
    v = spec.family.v
    if v < 1.0:
        return "subexponential"
    if v == 1.0:
        return "exponential"
    return "superexponential"


def _require_n(n: float) -> float:
    if not n >= _MIN_N:
        raise ValueError(f"n must be >= {_MIN_N:g} so that log log n > 0, got {n}")
    return float(n)


def w_sequence(n: float) -> float:
    """Slack sequence in the outer radius: sqrt(log log n).

    Any choice growing to infinity but below log log n works; the square root
    is positive for n >= 16 and keeps the outer radius close to the inner one.
    """
    return math.sqrt(math.log(math.log(_require_n(n))))


def light_tail_radii(spec: DensitySpec, n: float) -> tuple[float, float]:
    """Inner/outer radii (r0, r1) bracketing the fringe of a light-tail cloud.

    r0 solves psi(r0) = log n; r1 solves
    psi(r1) = log n + (d-1) log psi_inv(log n) - log psi'(psi_inv(log n)) - w(n).
    Isolated vertices populate B(0, r0) while points beyond r1 still exist,
    so r0 <= r1 certifies disconnection; when the slack choice makes r0 > r1
    at finite n the classification flags pre_asymptotic instead.
    """
    n = _require_n(n)
    if not isinstance(spec.family, LightTail):
        raise ValueError("light_tail_radii requires a light-tail spec")
    d = spec.dimension
    log_n = math.log(n)
    inv = psi_inverse(spec, log_n)
    arg1 = log_n + (d - 1) * math.log(inv) - math.log(psi_prime(spec, inv)) - w_sequence(n)
    # at very small n the outer exponent can dip below zero; the radius then
    # collapses to 0 and the classification flags the tuple as pre-asymptotic
    return inv, psi_inverse(spec, arg1) if arg1 > 0 else 0.0


def heavy_tail_radii(spec: DensitySpec, n: float) -> tuple[float, float]:
    """Heavy-tail radii: r0 = r1 = n^(1/(alpha - d/2))."""
    if not isinstance(spec.family, HeavyTail):
        raise ValueError("heavy_tail_radii requires a heavy-tail spec")
    r = float(n) ** (1.0 / (spec.family.alpha - spec.dimension / 2.0))
    return r, r


def tau(spec: DensitySpec, n: float) -> float:
    """Superexponential connectivity threshold scale: log log n / psi'(psi_inv(log n))."""
    n = _require_n(n)
    if not (isinstance(spec.family, LightTail) and spec.family.v > 1.0):
        raise ValueError("tau is defined for superexponential (v > 1) densities only")
    log_n = math.log(n)
    return math.log(log_n) / psi_prime(spec, psi_inverse(spec, log_n))


def chernoff_h(x: float) -> float:
    """Poisson large-deviation exponent H(x) = 1 - x + x log x, with H(0) = 1."""
    if x < 0:
        raise ValueError(f"H is defined for x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    return 1.0 - x + x * math.log(x)


def poisson_tail_bound(n: float, k: float, side: Literal["upper", "lower"]) -> float:
    """Chernoff bound exp(-n H(k/n)) on P(N >= k) (upper) or P(N <= k) (lower)."""
    if side == "upper":
        if k < n:
            raise ValueError("the upper bound requires k >= n")
    elif side == "lower":
        if k > n:
            raise ValueError("the lower bound requires k <= n")
    else:
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    return math.exp(-n * chernoff_h(k / n))


def expected_isolated(spec: DensitySpec, n: float, r: float, R: float) -> float:
    """Expected number of isolated vertices within distance R of the origin.

    Mecke expectation for the Poisson process:
        n * s_{d-1} * int_0^R exp(-n * ball_mass(rho, r)) q(rho) rho^{d-1} drho,
    computed by adaptive quadrature to 1e-6 relative. The integrand can be a
    thin boundary layer for large n, so the panel hints follow the deciles of
    the radial mass inside [0, R].
    """
    if not (r > 0 and R > 0):
        raise ValueError("expected_isolated requires r > 0 and R > 0")
    d = spec.dimension
    s = sphere_surface_area(d)

    def integrand(rho: float) -> float:
        return math.exp(-n * ball_mass(spec, rho, r)) * eval_density(spec, rho) * rho ** (d - 1)

    measure = radial_measure(spec)
    hints = measure.quantile(np.linspace(0.02, 0.98, 13))
    points = sorted({float(h) for h in hints if 0.0 < h < R})
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(
                integrand, 0.0, R, epsabs=1e-300, epsrel=1e-6, limit=500, points=points or None
            )
    except Exception as exc:  # quadrature trouble means a pathological input
        raise NumericFailure(f"isolated-vertex expectation quadrature failed: {exc}") from exc
    # the expectation feeds percent-level comparisons; 1e-4 relative is ample
    if not math.isfinite(val) or (val != 0.0 and err > 1e-4 * abs(val) and err > 1e-12):
        raise NumericFailure(
            f"isolated-vertex expectation quadrature failed (estimate {val:g}, error {err:g})"
        )
    return n * s * val


def tail_empty_prob(spec: DensitySpec, n: float, R: float) -> float:
    """P(no process point beyond radius R) = exp(-n * tail_mass(R))."""
    if R < 0:
        raise ValueError(f"R must be >= 0, got {R}")
    if math.isinf(R):
        return 1.0
    return math.exp(-n * tail_mass(spec, R))


@dataclass(frozen=True)
class ConcentrationRadii:
    """Radii for the concentration statement, with their exponents A_n, B_n."""

    r0: float
    r1: float
    a_n: float
    b_n: float
    delta: float
    pre_asymptotic: bool  # side condition psi'(psi_inv(log n)) * gamma * r > 1 failed


def concentration_radii(spec: DensitySpec, n: float, r: float, gamma: float) -> ConcentrationRadii:
    """Inner/outer radii for the per-cube concentration regime.

    A_n = log n + d log r + (d+2) log gamma
          - log log(psi_inv(log n)/(gamma r)) - delta,
    B_n = log n + (d-1) log psi_inv(log n) - log psi'(psi_inv(log n)) + log log n,
    with delta = log(3d/C) + 1, the smallest clean margin making
    d - C e^delta / 3 negative. Returns psi_inv of both exponents.
    """
    n = _require_n(n)
    if not (isinstance(spec.family, LightTail) and spec.family.v > 1.0):
        raise ValueError("concentration radii require a superexponential (v > 1) density")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if not r > 0:
        raise ValueError(f"r must be > 0, got {r}")
    d = spec.dimension
    log_n = math.log(n)
    inv = psi_inverse(spec, log_n)
    slope = psi_prime(spec, inv)
    delta = math.log(3.0 * d / spec.norm_constant) + 1.0
    ratio = inv / (gamma * r)
    if ratio <= 1.0:
        raise NumericFailure(
            "concentration exponent undefined: psi_inv(log n) <= gamma * r"
        )
    a_n = (
        log_n
        + d * math.log(r)
        + (d + 2) * math.log(gamma)
        - math.log(math.log(ratio))
        - delta
    )
    b_n = log_n + (d - 1) * math.log(inv) - math.log(slope) + math.log(log_n)
    pre = not (slope * gamma * r > 1.0)
    r0 = psi_inverse(spec, a_n) if a_n > 0 else float("nan")
    r1 = psi_inverse(spec, b_n) if b_n > 0 else float("nan")
    return ConcentrationRadii(r0=r0, r1=r1, a_n=a_n, b_n=b_n, delta=delta, pre_asymptotic=pre)


@dataclass(frozen=True)
class ThresholdReport:
    """Analytic quantities and the disconnection/concentration prediction."""

    n: float
    r: float
    gamma: float | None
    regime: Regime
    r0: float
    r1: float
    tau: float | None
    w_n: float | None
    a_n: float | None
    b_n: float | None
    expected_isolated: float
    tail_empty_prob: float
    prediction: Prediction
    flags: tuple = ()
    constants: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "gamma": self.gamma,
            "regime": self.regime,
            "r0": self.r0,
            "r1": self.r1,
            "tau": self.tau,
            "w_n": self.w_n,
            "a_n": self.a_n,
            "b_n": self.b_n,
            "expected_isolated": self.expected_isolated,
            "tail_empty_prob": self.tail_empty_prob,
            "prediction": self.prediction,
            "flags": list(self.flags),
            "constants": dict(self.constants),
        }


def classify(
    spec: DensitySpec,
    n: float,
    r: float,
    gamma: float | None = None,
    *,
    c_lo: float = DEFAULT_C_LO,
    c_hi: float = DEFAULT_C_HI,
    k_exp: float = DEFAULT_K_EXP,
    compute_expectations: bool = True,
) -> ThresholdReport:
    """Fill a ThresholdReport for one (density, n, r[, gamma]) tuple.

    Prediction rules: heavy tails and subexponential light tails are
    disconnected w.h.p. for any r <= 1; the exponential regime is
    disconnected while r * psi'(psi_inv(log n)) <= k_exp and untheorized
    beyond; the superexponential regime is disconnected below c_lo * tau,
    concentrating above c_hi * tau, untheorized in between.
    """
    n = _require_n(n)
    if not r > 0:
        raise ValueError(f"r must be > 0, got {r}")
    regime = regime_of(spec)
    flags: list[str] = []
    if r > 1.0:
        flags.append("r_exceeds_one")
    tau_val: float | None = None
    w_n: float | None = None
    a_n = b_n = None

    if regime == "heavy_tail":
        r0, r1 = heavy_tail_radii(spec, n)
        prediction: Prediction = "disconnected_whp"
    else:
        r0, r1 = light_tail_radii(spec, n)
        w_n = w_sequence(n)
        if r0 > r1:
            flags.append("pre_asymptotic")
        if regime == "subexponential":
            prediction = "disconnected_whp"
        elif regime == "exponential":
            scaled = r * psi_prime(spec, psi_inverse(spec, math.log(n)))
            prediction = "disconnected_whp" if scaled <= k_exp else "untheorized"
        else:
            tau_val = tau(spec, n)
            if r < c_lo * tau_val:
                prediction = "disconnected_whp"
            elif r > c_hi * tau_val:
                prediction = "concentration_regime"
            else:
                prediction = "untheorized"
            if gamma is not None:
                conc = concentration_radii(spec, n, r, gamma)
                a_n, b_n = conc.a_n, conc.b_n
                if conc.pre_asymptotic:
                    flags.append("gamma_side_condition_failed")

    if compute_expectations:
        e_iso = expected_isolated(spec, n, r, r0)
        p_empty = tail_empty_prob(spec, n, r1)
    else:
        e_iso = float("nan")
        p_empty = float("nan")

    return ThresholdReport(
        n=n,
        r=float(r),
        gamma=gamma,
        regime=regime,
        r0=r0,
        r1=r1,
        tau=tau_val,
        w_n=w_n,
        a_n=a_n,
        b_n=b_n,
        expected_isolated=e_iso,
        tail_empty_prob=p_empty,
        prediction=prediction,
        flags=tuple(flags),
        constants={"c_lo": c_lo, "c_hi": c_hi, "k_exp": k_exp, "w": "sqrt(log log n)"},
    )
