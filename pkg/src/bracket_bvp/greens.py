"""Fundamental pairs and the kernel of the shifted linear operator.

For a shift lam != 0 the homogeneous operator

    -s'' - n s' - (m/x) s' - lam s

has a regular solution u (analytic at 0, u'(0) = 0) and a second solution v
fixed by the terminal condition a1 v(1) + a2 v'(1) = 0.  The kernel

    G(x, t) = u(x) v(t) / W(t)   for x <= t,
              v(x) u(t) / W(t)   for x >= t,

with Wronskian W(t) = W(1) e^{n(1-t)} t^{-m}, represents the solution of
the nonhomogeneous problem as C u(x) / (a1 u(1) + a2 u'(1)) - int G h dt.

u is evaluated from its power series (for negative shifts the closed form
through the confluent hypergeometric function is evaluated as well and the
two must agree).  v is integrated backward from x = 1 with an adaptive
Runge-Kutta pair; it is unbounded at the origin, so below the smallest
grid node it is continued by its dominant behaviour t^{1-m} (or log t for
m = 1) fitted at the two smallest nodes.  Only the combination v/W enters
the kernel, which stays bounded.

FundamentalPair is immutable once built; kernel evaluation and the panel
quadrature are pure, so many x may be processed concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (
    DomainError,
    ParameterMismatch,
    ResonanceError,
    ShiftZeroError,
    SingularEndpointError,
    ConvergenceError,
)
from .model import BoundaryForm, GridSpec, MeshFunction, ProblemSpec, grid_nodes
from .specfun import (
    KUMMER_SERIES_RANGE,
    SeriesSolutionParams,
    kummer_m,
    series_coefficients,
)

__all__ = [
    "RegularSolution",
    "SingularSolution",
    "FundamentalPair",
    "SignReport",
    "build_fundamental_pair",
    "wronskian_at",
    "green_eval",
    "green_tensor",
    "green_sign_check",
    "apply_green",
    "boundary_term",
    "case1_closed_form",
]

#: backward-integration tolerance for the singular solution v
V_RTOL = 1e-10
#: relative agreement demanded between the series and closed-form u
CROSSCHECK_TOL = 1e-7

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


class RegularSolution:
    """Regular homogeneous solution u as a truncated power series."""

    __slots__ = ("coeffs", "dcoeffs")

    def __init__(self, coeffs: np.ndarray):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.dcoeffs = (self.coeffs * np.arange(len(self.coeffs)))[1:]

    def value(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x):
        return np.polynomial.polynomial.polyval(x, self.dcoeffs)


class SingularSolution:
    """Second solution v: dense backward integration plus a small-t tail."""

    __slots__ = ("m", "t_min", "_dense", "_tail")

    def __init__(self, m, t_min, dense, tail):
        self.m = m
        self.t_min = t_min
        self._dense = dense
        self._tail = tail  # (c0, c1) of c0 + c1 * t^(1-m), or c0 + c1 * log t for m == 1

    def _tail_value(self, t):
        c0, c1 = self._tail
        if self.m == 1.0:
            return c0 + c1 * np.log(t)
        return c0 + c1 * t ** (1.0 - self.m)

    def _tail_derivative(self, t):
        _, c1 = self._tail
        if self.m == 1.0:
            return c1 / t
        return c1 * (1.0 - self.m) * t ** (-self.m)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        lo = t < self.t_min
        if lo.any():
            out[lo] = self._tail_value(t[lo])
        if (~lo).any():
            out[~lo] = self._dense(t[~lo])[0]
        return float(out[0]) if scalar else out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        lo = t < self.t_min
        if lo.any():
            out[lo] = self._tail_derivative(t[lo])
        if (~lo).any():
            out[~lo] = self._dense(t[~lo])[1]
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class SignReport:
    """Outcome of sampling the kernel sign on a tensor grid over (0, 1]^2."""

    max_value: float
    x_at: float
    t_at: float
    samples: int
    passed: bool


@dataclass(frozen=True)
class FundamentalPair:
    """Homogeneous pair (u, v), Wronskian at 1, and the build parameters."""

    lam: float
    u: RegularSolution
    v: SingularSolution
    w1: float
    method: str  # "closed_form_case1" | "series_plus_integration"
    boundary: BoundaryForm
    m: float
    n: float
    grid: np.ndarray

    def matches(self, m, n, lam, boundary) -> bool:
        return (
            self.m == m and self.n == n and self.lam == lam and self.boundary == boundary
        )


def case1_closed_form(m: float, n: float, lam: float):
    """Closed-form regular solution for lam = -k^2 < 0, normalized to u(0) = 1.

    With r = sqrt(4 k^2 + n^2) the Laguerre-type solution
    e^{-(n+r)x/2} L_alpha^{m-1}(r x) rescaled to 1 at the origin equals
    e^{-(n+r)x/2} M(beta, m, r x), beta = m (n + r) / (2 r), which remains
    valid when the Laguerre normalization degenerates (alpha a negative
    integer).  Returns a scalar callable.
    """
    if not lam < 0:
        raise DomainError(f"closed form applies to negative shifts, got lam={lam}")
    r = math.sqrt(4.0 * (-lam) + n * n)
    decay = 0.5 * (n + r)
    beta = m * (n + r) / (2.0 * r)

    def u_closed(x: float) -> float:
        return math.exp(-decay * x) * kummer_m(beta, m, r * x)

    u_closed.rate = r
    return u_closed


def build_fundamental_pair(p: ProblemSpec, lam: float, g: GridSpec) -> FundamentalPair:
    """Construct (u, v) for the shift lam on the grid family of g.

    u comes from the power series normalized to u(0) = 1 (so u'(0) = 0
    holds exactly); for lam < 0 the closed form is evaluated on the grid as
    a cross-check and the two must agree to 1e-7 relative.  v integrates
    the homogeneous equation backward from x = 1 with terminal data
    (v(1), v'(1)) = (a2, -a1) when a2 > 0, else (0, -1), which satisfies
    the terminal boundary condition identically.  Positive shifts must stay
    below the principal eigenvalue; that check is the caller's job.
    """
    if lam == 0.0:
        raise ShiftZeroError("kernel construction needs a nonzero shift")
    if not math.isfinite(lam):
        raise DomainError(f"shift must be finite, got {lam!r}")
    m, n, bnd = p.m, p.n, p.boundary
    nodes = grid_nodes(g)

    u = RegularSolution(series_coefficients(SeriesSolutionParams(m=m, n=n, lam=lam)))

    method = "series_plus_integration"
    if lam < 0:
        closed = case1_closed_form(m, n, lam)
        if closed.rate <= KUMMER_SERIES_RANGE:
            method = "closed_form_case1"
            series_vals = u.value(nodes)
            closed_vals = np.array([closed(x) for x in nodes])
            scale = max(1.0, float(np.max(np.abs(series_vals))))
            gap = float(np.max(np.abs(series_vals - closed_vals))) / scale
            if gap >= CROSSCHECK_TOL:
                raise ConvergenceError(
                    f"series and closed-form u disagree by {gap:g} (tol {CROSSCHECK_TOL:g})"
                )

    v1, dv1 = (bnd.a2, -bnd.a1) if bnd.a2 > 0 else (0.0, -1.0)
    t_min = float(nodes[1])

    def backward_rhs(t, y):
        return (y[1], -(n + m / t) * y[1] - lam * y[0])

    sol = solve_ivp(
        backward_rhs,
        (1.0, t_min),
        (v1, dv1),
        method="DOP853",
        rtol=V_RTOL,
        atol=1e-13,
        dense_output=True,
    )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise SingularEndpointError(
            f"backward integration of v failed before t={t_min}: {sol.message}"
        )

    t1, t2 = float(nodes[1]), float(nodes[2])
    va, vb = float(sol.sol(t1)[0]), float(sol.sol(t2)[0])
    if m == 1.0:
        basis = np.array([[1.0, math.log(t1)], [1.0, math.log(t2)]])
    else:
        basis = np.array([[1.0, t1 ** (1.0 - m)], [1.0, t2 ** (1.0 - m)]])
    tail = tuple(np.linalg.solve(basis, np.array([va, vb])))
    v = SingularSolution(m, t_min, sol.sol, tail)

    u1 = float(u.value(1.0))
    du1 = float(u.derivative(1.0))
    w1 = u1 * dv1 - v1 * du1
    scale = (abs(bnd.a1) + abs(bnd.a2)) * max(abs(u1), abs(du1), 1.0)
    if abs(w1) < 1e-12 * scale:
        raise ResonanceError(f"W(1)={w1:g} vanishes: shift {lam} hit an eigenvalue")

    return FundamentalPair(
        lam=lam, u=u, v=v, w1=w1, method=method, boundary=bnd, m=m, n=n, grid=nodes
    )


def wronskian_at(fp: FundamentalPair, t):
    """W(t) = W(1) e^{n(1-t)} t^{-m}; accepts scalars or arrays, t > 0."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("Wronskian formula needs t > 0")
    out = fp.w1 * np.exp(fp.n * (1.0 - arr)) * arr ** (-fp.m)
    return float(out) if arr.ndim == 0 else out


def green_eval(fp: FundamentalPair, x: float, t: float) -> float:
    """Kernel value G(x, t) for x in [0, 1] and t in (0, 1].

    At t = 0 the kernel limit is 0 for m >= 1 (the Wronskian growth t^{-m}
    dominates v); for m < 1 the limit is not taken and t = 0 is rejected.
    """
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if t == 0.0:
        if fp.m >= 1.0:
            return 0.0
        raise DomainError("t = 0 is admissible only for m >= 1")
    if not (0.0 < t <= 1.0):
        raise DomainError(f"t must lie in (0, 1], got {t}")
    w = wronskian_at(fp, t)
    if x <= t:
        return float(fp.u.value(x)) * float(fp.v.value(t)) / w
    return float(fp.v.value(x)) * float(fp.u.value(t)) / w


def green_tensor(fp: FundamentalPair, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Kernel values on the tensor grid xs x ts (both within (0, 1])."""
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if np.any(xs < 0) or np.any(xs > 1) or np.any(ts <= 0) or np.any(ts > 1):
        raise DomainError("tensor grid must satisfy x in [0, 1], t in (0, 1]")
    w = wronskian_at(fp, ts)
    ux = fp.u.value(xs)
    # x = 0 rows always take the x <= t branch, so the v(x) factor there is
    # discarded; substitute a harmless abscissa to keep the tail finite.
    vx = fp.v.value(np.where(xs == 0.0, fp.v.t_min, xs))
    ut, vt = fp.u.value(ts), fp.v.value(ts)
    upper = np.outer(ux, vt / w)  # x <= t branch
    lower = np.outer(vx, ut / w)  # x >= t branch
    mask = xs[:, None] <= ts[None, :]
    return np.where(mask, upper, lower)


def green_sign_check(fp: FundamentalPair, samples: int) -> SignReport:
    """Sample G on a samples x samples tensor grid over (0, 1]^2.

    PASS means the largest value found does not exceed 1e-10: the kernel is
    non-positive wherever sampled.
    """
    if samples < 100:
        raise DomainError(f"need at least 100 samples per axis, got {samples}")
    pts = np.arange(1, samples + 1) / samples
    values = green_tensor(fp, pts, pts)
    flat = int(np.argmax(values))
    i, j = divmod(flat, samples)
    max_value = float(values[i, j])
    return SignReport(
        max_value=max_value,
        x_at=float(pts[i]),
        t_at=float(pts[j]),
        samples=samples,
        passed=max_value <= 1e-10,
    )


def apply_green(fp: FundamentalPair, h: MeshFunction) -> MeshFunction:
    """The integral term of the solution formula: x -> -int_0^1 G(x,t) h(t) dt.

    Composite 16-point Gauss-Legendre per grid interval; because evaluation
    points are grid nodes, the kernel kink at t = x always falls on a panel
    edge.  h is interpolated cubically between nodes.  The two kernel
    branches separate into cumulative panel sums of u h t^m e^{nt} and
    v h t^m e^{nt}, where the t^m weight cancels the Wronskian growth.
    """
    nodes = fp.grid
    if len(h.nodes) != len(nodes) or not np.array_equal(h.nodes, nodes):
        raise ParameterMismatch("h lives on a different grid than the fundamental pair")
    spline = CubicSpline(h.nodes, h.values)
    m, n, w1 = fp.m, fp.n, fp.w1

    left = nodes[:-1]
    right = nodes[1:]
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    tq = mid[:, None] + half[:, None] * _GL_X[None, :]  # (panels, 16)
    wq = half[:, None] * _GL_W[None, :]

    tq_flat = tq.ravel()
    common = (spline(tq_flat) * tq_flat ** m * np.exp(n * tq_flat)).reshape(tq.shape)
    panel_u = np.sum(wq * common * fp.u.value(tq_flat).reshape(tq.shape), axis=1)
    panel_v = np.sum(wq * common * fp.v.value(tq_flat).reshape(tq.shape), axis=1)
    if not (np.all(np.isfinite(panel_u)) and np.all(np.isfinite(panel_v))):
        raise ConvergenceError("kernel quadrature produced non-finite panel integrals")

    # cum_u[i] = integral over t < nodes[i] of u h / W (up to the e^{-n}/w1
    # factor); cum_v[i] covers t > nodes[i].
    cum_u = np.concatenate(([0.0], np.cumsum(panel_u)))
    cum_v = np.concatenate((np.cumsum(panel_v[::-1])[::-1], [0.0]))

    factor = math.exp(-n) / w1
    values = np.empty_like(nodes)
    values[0] = -fp.u.value(nodes[0]) * cum_v[0] * factor
    values[1:] = -(fp.v.value(nodes[1:]) * cum_u[1:] + fp.u.value(nodes[1:]) * cum_v[1:]) * factor

    d0 = -float(fp.u.derivative(0.0)) * cum_v[0] * factor
    d1 = -float(fp.v.derivative(1.0)) * cum_u[-1] * factor
    return MeshFunction(nodes, values, d0, d1)


def boundary_term(fp: FundamentalPair, C: float) -> MeshFunction:
    """The boundary part of the solution formula: C u(x) / (a1 u(1) + a2 u'(1))."""
    bnd = fp.boundary
    u1 = float(fp.u.value(1.0))
    du1 = float(fp.u.derivative(1.0))
    denom = bnd.a1 * u1 + bnd.a2 * du1
    if abs(denom) < 1e-12 * abs(u1):
        raise ResonanceError(f"boundary normalization a1 u(1) + a2 u'(1) = {denom:g} vanishes")
    scale = C / denom
    values = scale * fp.u.value(fp.grid)
    d0 = scale * float(fp.u.derivative(0.0))
    d1 = scale * du1
    return MeshFunction(fp.grid, values, d0, d1)
