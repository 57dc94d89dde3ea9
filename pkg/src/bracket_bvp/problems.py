"""Catalog of classic singular diffusion problems with verified brackets.

Six fixtures spanning both shift regimes, each shipped with the bracketing
pair that makes its region of existence checkable, the one-sided constant
quoted in the application literature, and (for the polytrope) the exact
solution.  The quoted constants are kept verbatim even where the sampled
slope bound disagrees; the engine reports both and never silently
"corrects" a published value.

Read-only fixtures: entries are frozen and the list is rebuilt per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .model import (
    BoundaryForm,
    GridSpec,
    MeshFunction,
    ProblemSpec,
    compile_expression,
    eval_on_grid,
    validate_problem,
)

__all__ = ["CatalogEntry", "catalog"]


@dataclass(frozen=True)
class CatalogEntry:
    """One fixture: problem, bracketing pair, published constants.

    alpha0_expr/beta0_expr are formulas of x in the flat-format grammar;
    exact_expr is present only when a closed-form solution is known.
    """

    problem: ProblemSpec
    alpha0_expr: str
    beta0_expr: str
    published_L: float
    published_theorem: str  # "thm1" | "thm2"
    source: str
    exact_expr: Optional[str] = None
    notes: tuple = ()

    @cached_property
    def alpha0_fn(self):
        fn = compile_expression(self.alpha0_expr, variables=("x",))
        return lambda x: fn(x)

    @cached_property
    def beta0_fn(self):
        fn = compile_expression(self.beta0_expr, variables=("x",))
        return lambda x: fn(x)

    @cached_property
    def exact_fn(self):
        if self.exact_expr is None:
            return None
        fn = compile_expression(self.exact_expr, variables=("x",))
        return lambda x: fn(x)

    def alpha0_on(self, g: GridSpec) -> MeshFunction:
        return eval_on_grid(g, self.alpha0_fn)

    def beta0_on(self, g: GridSpec) -> MeshFunction:
        return eval_on_grid(g, self.beta0_fn)

    def region(self) -> str:
        return f"{self.alpha0_expr} <= s <= {self.beta0_expr}"


def catalog() -> tuple:
    """The six catalog fixtures, in their canonical order (index 1..6)."""
    entries = (
        CatalogEntry(
            problem=ProblemSpec(
                m=1.0,
                n=1.0,
                boundary=BoundaryForm(1.0, 1.0, 1.0),
                f=lambda x, s: 1.0 - 2.0 * np.exp(s),
                df_ds=lambda x, s: -2.0 * np.exp(s),
                label="robin-exponential-sink",
                f_expr="1 - 2*exp(s)",
            ),
            alpha0_expr="-1",
            beta0_expr="1",
            published_L=2.0 * math.e,
            published_theorem="thm1",
            source="diffusion with an exponential absorption term and mixed boundary data",
        ),
        CatalogEntry(
            problem=ProblemSpec(
                m=5.0,
                n=10.0,
                boundary=BoundaryForm(6.0, 1.0, 1.0),
                f=lambda x, s: 0.75 * s,
                df_ds=lambda x, s: 0.75 * np.ones_like(np.asarray(s, dtype=float)),
                label="linear-source-strong-drift",
                f_expr="(3/4)*s",
            ),
            alpha0_expr="0",
            beta0_expr="(2 - x^2)/3",
            published_L=0.75,
            published_theorem="thm2",
            source="linear production under strong drift, Robin boundary",
        ),
        CatalogEntry(
            problem=ProblemSpec(
                m=1.0,
                n=0.0,
                boundary=BoundaryForm(1.0, 0.0, 0.0),
                f=lambda x, s: 0.25 * np.exp(s),
                df_ds=lambda x, s: 0.25 * np.exp(s),
                label="thermal-explosion-cylinder",
                f_expr="exp(s)/4",
            ),
            alpha0_expr="0",
            beta0_expr="(3 - x^2)/4",
            published_L=0.25,
            published_theorem="thm2",
            source="Poisson-Boltzmann thermal explosion in a cylindrical vessel",
            notes=("boundary datum 0 comes from the Dirichlet condition s(1) = 0",),
        ),
        CatalogEntry(
            problem=ProblemSpec(
                m=3.0,
                n=0.0,
                boundary=BoundaryForm(1.0, 0.0, 2.0),
                f=lambda x, s: 2.0 / s**2,
                df_ds=lambda x, s: -4.0 / s**3,
                label="elastic-membrane-radial-stress",
                f_expr="2/s^2",
            ),
            alpha0_expr="2",
            beta0_expr="2 + (1 - x^2)/9",
            published_L=19.0 / 36.0,
            published_theorem="thm1",
            source="radial stress of a plane circular elastic surface under normal pressure",
            notes=(
                "boundary datum 2 comes from the edge condition s(1) = 2",
                "quoted constant 19/36 exceeds the sampled slope bound 1/2 on this bracket",
            ),
        ),
        CatalogEntry(
            problem=ProblemSpec(
                m=2.0,
                n=0.0,
                boundary=BoundaryForm(1.0, 0.0, math.sqrt(3.0) / 2.0),
                f=lambda x, s: s**5,
                df_ds=lambda x, s: 5.0 * s**4,
                label="lane-emden-index-5",
                f_expr="s^5",
            ),
            alpha0_expr="3/4",
            beta0_expr="1/sqrt(0.7 + x^2/2)",
            published_L=1.58203125,
            published_theorem="thm2",
            source="Lane-Emden polytrope of index 5",
            exact_expr="1/sqrt(1 + x^2/3)",
        ),
        CatalogEntry(
            problem=ProblemSpec(
                m=2.0,
                n=0.0,
                boundary=BoundaryForm(2.0, 1.0, 0.0),
                f=lambda x, s: np.exp(-s),
                df_ds=lambda x, s: -np.exp(-s),
                label="human-head-heat-source",
                f_expr="exp(-s)",
            ),
            alpha0_expr="0",
            beta0_expr="2 - x^2",
            published_L=math.e**2,
            published_theorem="thm1",
            source="steady heat-source distribution in the human head",
            notes=("quoted constant e^2 exceeds the sampled slope bound 1 on this bracket",),
        ),
    )
    for entry in entries:
        validate_problem(entry.problem)
    return entries
