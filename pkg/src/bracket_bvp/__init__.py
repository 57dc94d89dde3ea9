"""Existence certificates for singular nonlinear diffusion boundary-value problems.

Solvers and checkers for the class

    -s''(x) - n s'(x) - (m/x) s'(x) = f(x, s),  x in (0, 1),  m > 0,
    s'(0) = 0,   a1 s(1) + a2 s'(1) = C,

built around a constructive monotone iteration between an upper and a
lower function, a Green's-kernel representation of the shifted linear
operator with a certified sign, an independent finite-difference backend,
and principal-eigenvalue estimation that bounds the admissible positive
shifts.
"""

from .errors import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    EvaluationFailed,
    NoAdmissibleShift,
    NotFoundInRange,
    ParameterMismatch,
    PoleError,
    ResonanceError,
    ShiftZeroError,
    SingularEndpointError,
    SingularityStrengthNonpositive,
    SolverError,
    ValidationError,
)
from .model import (
    BoundaryForm,
    GridSpec,
    MeshFunction,
    ProblemSpec,
    compile_expression,
    eval_on_grid,
    grid_nodes,
    mesh_from_values,
    problem_from_text,
    problem_to_text,
    validate_problem,
)
from .specfun import (
    SeriesSolutionParams,
    kummer_m,
    laguerre_general,
    ln_gamma,
    regular_series_solution,
    tricomi_u,
)
from .greens import (
    FundamentalPair,
    SignReport,
    apply_green,
    boundary_term,
    build_fundamental_pair,
    green_eval,
    green_sign_check,
    wronskian_at,
)
from .linsolve import (
    LinearBVP,
    boundary_residuals,
    nonlinear_residual,
    solve_linear_fdm,
    solve_linear_green,
)
from .eigen import EigenResult, boundary_functional, principal_eigenvalue
from .monotone import (
    ExistenceCertificate,
    IterationSettings,
    IterationTrace,
    VerificationReport,
    choose_lambda,
    iterate,
    lipschitz_estimate,
    slope_range,
    solve_region,
    verify_lower,
    verify_upper,
)
from .problems import CatalogEntry, catalog

__version__ = "0.1.0"
