"""Principal eigenvalue of the homogeneous shifted problem.

The admissibility ceiling for positive shifts: the kernel sign certificate
holds for lam below the first eigenvalue and breaks past it.  The scalar
function phi(lam) = a1 u_lam(1) + a2 u_lam'(1), built from the regular
series solution, vanishes exactly at eigenvalues; robustness beats speed
at this scale, so the root is located by a coarse march followed by
bisection rather than any derivative-based method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotFoundInRange
from .model import BoundaryForm
from .specfun import SeriesSolutionParams, series_coefficients

__all__ = ["EigenResult", "boundary_functional", "principal_eigenvalue"]

#: default upper end of the eigenvalue scan
LAMBDA_SCAN_DEFAULT = 400.0


@dataclass(frozen=True)
class EigenResult:
    """First positive root of the boundary functional."""

    lambda0: float
    bracket: tuple
    evaluations: int


def boundary_functional(m: float, n: float, b: BoundaryForm, lam: float) -> float:
    """phi(lam) = a1 u(1) + a2 u'(1) for the regular solution with u(0) = 1."""
    if lam < 0:
        raise DomainError(f"boundary functional is scanned for lam >= 0, got {lam}")
    c = series_coefficients(SeriesSolutionParams(m=m, n=n, lam=lam))
    u1 = float(np.sum(c))
    du1 = float(np.sum(c * np.arange(len(c))))
    return b.a1 * u1 + b.a2 * du1


def principal_eigenvalue(
    m: float,
    n: float,
    b: BoundaryForm,
    tol: float = 1e-8,
    lam_scan: float = LAMBDA_SCAN_DEFAULT,
) -> EigenResult:
    """Smallest lam > 0 with phi(lam) = 0, to bracket width tol.

    Marches lam in steps of max(1, lam_scan/64) from 0 until the sign
    changes, then bisects.  Reports the phi samples seen when no sign
    change occurs within the scan range.
    """
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    step = max(1.0, lam_scan / 64.0)
    evaluations = 0

    def phi(lam):
        nonlocal evaluations
        evaluations += 1
        return boundary_functional(m, n, b, lam)

    samples = []
    lo, phi_lo = 0.0, phi(0.0)
    samples.append((lo, phi_lo))
    hi = step
    while hi <= lam_scan + 1e-9:
        phi_hi = phi(hi)
        samples.append((hi, phi_hi))
        if phi_lo * phi_hi <= 0.0:
            break
        lo, phi_lo = hi, phi_hi
        hi += step
    else:
        raise NotFoundInRange(
            f"no sign change of phi on [0, {lam_scan}] at step {step}", samples=samples
        )

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        phi_mid = phi(mid)
        if phi_lo * phi_mid <= 0.0:
            hi = mid
        else:
            lo, phi_lo = mid, phi_mid

    return EigenResult(lambda0=0.5 * (lo + hi), bracket=(lo, hi), evaluations=evaluations)
