"""Exception types shared across the solver modules."""


class SolverError(Exception):
    """Base class for every failure raised by this package."""


class ValidationError(SolverError):
    """A domain object violates its invariants."""


class SingularityStrengthNonpositive(ValidationError):
    """The singular coefficient strength m must be positive."""


class EvaluationFailed(SolverError):
    """A user-supplied function produced a non-finite value."""


class DomainError(SolverError):
    """Argument lies outside the supported domain."""


class PoleError(SolverError):
    """Evaluation requested at a pole."""


class ConvergenceError(SolverError):
    """An iterative evaluation failed to reach its tolerance."""


class ShiftZeroError(SolverError):
    """Kernel construction requires a nonzero spectral shift."""


class ResonanceError(SolverError):
    """The shift sits at (or numerically near) an eigenvalue."""


class SingularEndpointError(SolverError):
    """Backward integration broke down before reaching the grid."""


class ParameterMismatch(SolverError):
    """Operands were built from inconsistent parameters or grids."""


class DivergenceError(SolverError):
    """The constructive iteration is diverging."""


class NoAdmissibleShift(SolverError):
    """No shift satisfies the admissibility constraints."""


class NotFoundInRange(SolverError):
    """No eigenvalue sign change found within the scan range."""

    def __init__(self, message, samples=None):
        super().__init__(message)
        self.samples = tuple(samples or ())
