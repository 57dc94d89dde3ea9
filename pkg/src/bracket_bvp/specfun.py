"""Special functions for the closed-form and series solution paths.

Everything here is a deterministic pure evaluation of real arguments; no
caching, no complex branches, no negative-axis Gamma reflection.  The
Tricomi function is computed from its Laplace integral rather than the
Kummer connection formula because the latter degenerates for integer
second parameter, which is exactly the case the kernel construction needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, gammasgn

from .errors import ConvergenceError, DomainError, PoleError, ValidationError

__all__ = [
    "SeriesSolutionParams",
    "ln_gamma",
    "kummer_m",
    "laguerre_general",
    "tricomi_u",
    "series_coefficients",
    "regular_series_solution",
    "regular_series_derivatives",
]

#: largest |z| accepted by the direct Kummer series in double precision
KUMMER_SERIES_RANGE = 60.0


def ln_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0.

    Relative error <= 1e-12 on [1e-3, 1e3]; the negative axis is out of
    scope (no reflection).
    """
    if not (isinstance(x, (int, float)) and math.isfinite(x)) or x <= 0:
        raise DomainError(f"ln_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def _is_nonpositive_integer(b: float) -> bool:
    return b <= 0.5 and abs(b - round(b)) < 1e-12


def _kummer_series(a: float, b: float, z: float, max_terms: int):
    """Direct series for M(a, b, z); returns (sum, largest |term|).

    Kahan-compensated accumulation; stops after three consecutive terms
    below 1e-16 of the running sum (guards against accidental zero terms).
    """
    total = 1.0
    comp = 0.0
    term = 1.0
    peak = 1.0
    small = 0
    for k in range(max_terms):
        term *= (a + k) * z / ((b + k) * (k + 1.0))
        peak = max(peak, abs(term))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(term) < 1e-16 * abs(total):
            small += 1
            if small >= 3:
                return total, peak
        else:
            small = 0
    raise ConvergenceError(f"Kummer series did not converge for a={a}, b={b}, z={z}")


def kummer_m(a: float, b: float, z: float, max_terms: int = 600) -> float:
    """Confluent hypergeometric M(a, b, z) by its power series."""
    for name, v in (("a", a), ("b", b), ("z", z)):
        if not math.isfinite(v):
            raise DomainError(f"kummer_m argument {name} must be finite, got {v!r}")
    if _is_nonpositive_integer(b):
        raise PoleError(f"M(a, b, z) has a pole at non-positive integer b={b}")
    if abs(z) > KUMMER_SERIES_RANGE:
        raise DomainError(f"|z|={abs(z)} is outside the series regime (<= {KUMMER_SERIES_RANGE})")
    value, _ = _kummer_series(a, b, z, max_terms)
    return value


def laguerre_general(alpha: float, nu: float, z: float) -> float:
    """Generalized Laguerre function L_alpha^nu(z) of (possibly) non-integer degree.

    Defined through Gamma(alpha+nu+1) / (Gamma(alpha+1) Gamma(nu+1)) *
    M(-alpha, nu+1, z); reduces to the classical polynomial for
    non-negative integer alpha.
    """
    if not (nu > -1):
        raise DomainError(f"nu must exceed -1, got {nu}")
    alpha_is_nonneg_int = alpha >= -1e-12 and abs(alpha - round(alpha)) < 1e-12
    if not alpha_is_nonneg_int:
        if alpha < 0 and abs(alpha - round(alpha)) < 1e-12:
            raise PoleError(f"normalization Gamma(alpha+1) has a pole at alpha={alpha}")
        if alpha + nu + 1 <= 0:
            raise DomainError(f"need alpha + nu + 1 > 0, got {alpha + nu + 1}")
    # Gamma(alpha+nu+1) and Gamma(nu+1) take positive arguments here; only
    # Gamma(alpha+1) can change sign (alpha+1 < 0 admissible when non-integer).
    sign = gammasgn(alpha + 1.0)
    log_norm = gammaln(alpha + nu + 1.0) - gammaln(alpha + 1.0) - gammaln(nu + 1.0)
    return float(sign * math.exp(log_norm) * kummer_m(-alpha, nu + 1.0, z))


def tricomi_u(a: float, b: float, z: float) -> float:
    """Tricomi U(a, b, z) from its Laplace integral, for a > 0 and z > 0.

    U(a,b,z) = 1/Gamma(a) * int_0^inf e^{-z t} t^{a-1} (1+t)^{b-a-1} dt,
    evaluated after the substitution t = tau / (1 - tau), which turns the
    integrand into tau^{a-1} (1-tau)^{-b} e^{-z tau/(1-tau)} on (0, 1).
    """
    if not (a > 0) or not (z > 0) or not all(map(math.isfinite, (a, b, z))):
        raise DomainError(f"tricomi_u needs a > 0 and z > 0, got a={a}, z={z}")

    def integrand(tau):
        if tau <= 0.0 or tau >= 1.0:
            return 0.0
        expo = (a - 1.0) * math.log(tau) - b * math.log1p(-tau) - z * tau / (1.0 - tau)
        return math.exp(expo)

    # The integrand peaks near tau ~ 1/(1+z); steer the subdivision there.
    peak = min(0.9, 1.0 / (1.0 + z))
    out = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200,
               points=(peak,), full_output=1)
    if len(out) > 3:
        raise ConvergenceError(f"U({a},{b},{z}) quadrature failed: {out[3]}")
    value, abserr = out[0], out[1]
    if abserr > 1e-8 * max(abs(value), 1e-300):
        raise ConvergenceError(
            f"U({a},{b},{z}) quadrature error {abserr:g} too large for value {value:g}"
        )
    return value * math.exp(-math.lgamma(a))


@dataclass(frozen=True)
class SeriesSolutionParams:
    """Inputs of the regular power-series solution at the origin.

    The shifted homogeneous equation, multiplied by -x, reads

        x s'' + (n x + m) s' + lam x s = 0,

    and has a unique solution analytic at 0 with s(0) = 1, s'(0) = 0.
    """

    m: float
    n: float
    lam: float
    max_terms: int = 400
    tol: float = 1e-12

    def __post_init__(self):
        if not (self.m > 0):
            raise ValidationError(f"m must be positive, got {self.m}")
        if not (0 < self.tol <= 1e-6):
            raise ValidationError(f"tol must lie in (0, 1e-6], got {self.tol}")
        if self.max_terms < 50:
            raise ValidationError(f"max_terms must be >= 50, got {self.max_terms}")


def series_coefficients(p: SeriesSolutionParams) -> np.ndarray:
    """Power-series coefficients c_j of the regular solution.

    Two-term recurrence c_j = -(n (j-1) c_{j-1} + lam c_{j-2}) / (j (j+m-1))
    with c_0 = 1; the j = 1 step forces c_1 = 0, encoding s'(0) = 0.
    Truncates once three consecutive terms of both the value and slope
    series drop below tol (relative to the unit leading coefficient).
    """
    c = [1.0, 0.0]
    consecutive = 0
    for j in range(2, p.max_terms + 2):
        cj = -(p.n * (j - 1) * c[-1] + p.lam * c[-2]) / (j * (j + p.m - 1.0))
        c.append(cj)
        if max(abs(cj), j * abs(cj)) < p.tol:
            consecutive += 1
            if consecutive >= 3:
                return np.asarray(c)
        else:
            consecutive = 0
    # the solution is entire, so exhaustion signals far too few terms
    raise ConvergenceError(
        f"series for (m={p.m}, n={p.n}, lam={p.lam}) needs more than {p.max_terms} terms"
    )


def regular_series_solution(p: SeriesSolutionParams, x: float):
    """Value and first derivative of the regular solution at x in [0, 1]."""
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    value, d1, _ = regular_series_derivatives(p, x)
    return value, d1


def regular_series_derivatives(p: SeriesSolutionParams, x: float):
    """Value plus first and second derivatives, all from the same series."""
    c = series_coefficients(p)
    dc = (c * np.arange(len(c)))[1:]
    d2c = (dc * np.arange(len(dc)))[1:]
    pv = np.polynomial.polynomial.polyval
    return float(pv(x, c)), float(pv(x, dc)), float(pv(x, d2c))
