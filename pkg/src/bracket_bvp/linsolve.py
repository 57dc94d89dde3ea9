"""Backends for the shifted nonhomogeneous linear problem, plus residuals.

Two independent routes solve

    -s'' - n s' - (m/x) s' - lam s = h,   s'(0) = 0,  a1 s(1) + a2 s'(1) = C:

the kernel representation of the greens module and a second-order finite
difference scheme.  They share no code paths, which is what makes their
agreement a meaningful check.

The finite-difference scheme uses central 3-point stencils (exact on
quadratics).  At x = 0 the boundary condition s'(0) = 0 turns (m/x) s'
into m s''(0), so the row reads -(1+m) s''(0) - lam s(0) = h(0) with the
ghost symmetry s(-dx) = s(dx).  At x = 1 a Robin condition is folded into
the operator row through a ghost node at 1 + dx, keeping second order;
a2 = 0 degenerates to a plain Dirichlet row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import EvaluationFailed, ParameterMismatch, ResonanceError
from .greens import FundamentalPair, apply_green, boundary_term
from .model import BoundaryForm, GridSpec, MeshFunction, ProblemSpec, grid_nodes, mesh_from_values
from .stencils import fd_weights

__all__ = [
    "LinearBVP",
    "fdm_system",
    "solve_linear_fdm",
    "solve_linear_green",
    "nonlinear_residual",
    "boundary_residuals",
]


@dataclass(frozen=True)
class LinearBVP:
    """Right-hand side and parameters of the shifted linear problem.

    For positive shifts the caller is responsible for lam staying below the
    principal eigenvalue; the factorization reports ResonanceError when a
    pivot collapses.
    """

    m: float
    n: float
    lam: float
    h: MeshFunction
    boundary: BoundaryForm


class _Tridiagonal:
    """LU-factored tridiagonal operator rows with the rhs assembly rule."""

    def __init__(self, sub, dia, sup, boundary, nodes, robin_rhs_factor):
        self.sub = sub
        self.dia = dia
        self.sup = sup
        self.boundary = boundary
        self.nodes = nodes
        self.robin_rhs_factor = robin_rhs_factor
        dl = sub[1:].copy()
        du = sup[:-1].copy()
        dlf, df, duf, du2, ipiv, info = lapack.dgttrf(dl, dia.copy(), du)
        if info > 0:
            raise ResonanceError("tridiagonal factorization hit an exactly zero pivot")
        scale = float(np.max(np.abs(dia)))
        if np.min(np.abs(df)) < 1e-12 * scale:
            raise ResonanceError(
                "tridiagonal pivot underflow: shift is at or near a discrete eigenvalue"
            )
        self._factors = (dlf, df, duf, du2, ipiv)

    def rhs(self, h_values, C):
        b = np.asarray(h_values, dtype=float).copy()
        a2 = self.boundary.a2
        if a2 == 0:
            b[-1] = C
        else:
            b[-1] = b[-1] + self.robin_rhs_factor * C
        return b

    def solve(self, h_values, C):
        dlf, df, duf, du2, ipiv = self._factors
        x, info = lapack.dgttrs(dlf, df, duf, du2, ipiv, self.rhs(h_values, C))
        if info != 0:
            raise ResonanceError(f"tridiagonal solve failed with info={info}")
        return x

    def apply(self, values):
        """Forward application of the operator rows (used by residual checks)."""
        v = np.asarray(values, dtype=float)
        out = self.dia * v
        out[1:] += self.sub[1:] * v[:-1]
        out[:-1] += self.sup[:-1] * v[1:]
        return out


def fdm_system(m, n, lam, boundary: BoundaryForm, nodes) -> _Tridiagonal:
    """Assemble and factor the scheme's tridiagonal rows on the given nodes."""
    x = np.asarray(nodes, dtype=float)
    N = len(x)
    sub = np.zeros(N)
    dia = np.zeros(N)
    sup = np.zeros(N)

    dx0 = x[1] - x[0]
    dia[0] = 2.0 * (1.0 + m) / dx0**2 - lam
    sup[0] = -2.0 * (1.0 + m) / dx0**2

    xi = x[1:-1]
    hm = xi - x[:-2]
    hp = x[2:] - xi
    span = hm + hp
    w2m, w2c, w2p = 2.0 / (hm * span), -2.0 / (hm * hp), 2.0 / (hp * span)
    w1m, w1c, w1p = -hp / (hm * span), (hp - hm) / (hm * hp), hm / (hp * span)
    conv = n + m / xi
    sub[1:-1] = -w2m - conv * w1m
    dia[1:-1] = -w2c - conv * w1c - lam
    sup[1:-1] = -w2p - conv * w1p

    a1, a2 = boundary.a1, boundary.a2
    if a2 == 0:
        dia[-1] = a1
        robin_rhs_factor = 0.0
    else:
        d = x[-1] - x[-2]
        sub[-1] = -2.0 / d**2
        dia[-1] = 2.0 / d**2 + 2.0 * a1 / (a2 * d) + (n + m) * a1 / a2 - lam
        robin_rhs_factor = 2.0 / (a2 * d) + (n + m) / a2
    return _Tridiagonal(sub, dia, sup, boundary, x, robin_rhs_factor)


def solve_linear_fdm(lb: LinearBVP, g: GridSpec) -> MeshFunction:
    """Finite-difference solve of the shifted linear problem."""
    nodes = grid_nodes(g)
    if len(lb.h.nodes) != len(nodes) or not np.array_equal(lb.h.nodes, nodes):
        raise ParameterMismatch("h lives on a different grid than GridSpec describes")
    system = fdm_system(lb.m, lb.n, lb.lam, lb.boundary, nodes)
    values = system.solve(lb.h.values, lb.boundary.C)
    return mesh_from_values(nodes, values)


def solve_linear_green(lb: LinearBVP, fp: FundamentalPair) -> MeshFunction:
    """Kernel-representation solve: boundary term plus the integral term.

    The result satisfies both boundary conditions to roundoff by
    construction; the endpoint derivative slots carry the analytic values
    from the representation rather than finite-difference estimates.
    """
    if not fp.matches(lb.m, lb.n, lb.lam, lb.boundary):
        raise ParameterMismatch(
            "fundamental pair was built for different (m, n, lambda, boundary)"
        )
    integral = apply_green(fp, lb.h)
    bterm = boundary_term(fp, lb.boundary.C)
    return MeshFunction(
        integral.nodes,
        integral.values + bterm.values,
        integral.d_at_0 + bterm.d_at_0,
        integral.d_at_1 + bterm.d_at_1,
    )


def _source_values(p: ProblemSpec, x, s):
    with np.errstate(all="ignore"):
        try:
            out = np.asarray(p.f(x, s), dtype=float)
        except (TypeError, ValueError):
            out = np.array([p.f(xx, ss) for xx, ss in zip(np.atleast_1d(x), np.atleast_1d(s))])
    out = np.broadcast_to(out, np.shape(x)).astype(float)
    if not np.all(np.isfinite(out)):
        bad = np.atleast_1d(x)[~np.isfinite(np.atleast_1d(out))][0]
        raise EvaluationFailed(f"f(x, s) is non-finite at x={bad!r}")
    return out


def nonlinear_residual(p: ProblemSpec, s: MeshFunction) -> MeshFunction:
    """Pointwise residual of the nonlinear equation on the grid of s.

    Uses the same discrete operator as solve_linear_fdm: central 3-point
    stencils inside, the limit rule -(1+m) s''(0) at the origin.  At x = 1,
    where the solver row encodes the boundary condition instead of the
    equation, one-sided stencils (4 nodes for s'', 3 for s') evaluate the
    honest differential residual.  Boundary-condition residuals are a
    separate channel: see boundary_residuals.
    """
    x = s.nodes
    v = s.values
    N = len(x)
    r = np.empty(N)

    dx0 = x[1] - x[0]
    r[0] = -(1.0 + p.m) * 2.0 * (v[1] - v[0]) / dx0**2

    xi = x[1:-1]
    hm = xi - x[:-2]
    hp = x[2:] - xi
    span = hm + hp
    d2 = 2.0 * (v[:-2] / (hm * span) - v[1:-1] / (hm * hp) + v[2:] / (hp * span))
    d1 = (-hp / (hm * span)) * v[:-2] + ((hp - hm) / (hm * hp)) * v[1:-1] + (hm / (hp * span)) * v[2:]
    r[1:-1] = -d2 - (p.n + p.m / xi) * d1

    d1_end = float(fd_weights(x[-3:], x[-1], 1) @ v[-3:])
    d2_end = float(fd_weights(x[-4:], x[-1], 2) @ v[-4:])
    r[-1] = -d2_end - (p.n + p.m) * d1_end

    r -= _source_values(p, x, v)
    return mesh_from_values(x, r)


def boundary_residuals(p: ProblemSpec, s: MeshFunction):
    """(|s'(0)| estimate, a1 s(1) + a2 s'(1) - C), via one-sided stencils."""
    x, v = s.nodes, s.values
    width = min(5, len(x))
    d0 = float(fd_weights(x[:width], x[0], 1) @ v[:width])
    d1 = float(fd_weights(x[-width:], x[-1], 1) @ v[-width:])
    b = p.boundary
    return d0, b.a1 * v[-1] + b.a2 * d1 - b.C
