"""Exception hierarchy shared across the package."""


class SoftdockError(Exception):
    """Base class for every error raised by this package."""


class SingularAttitudeError(SoftdockError, ValueError):
    """Reduced quaternion reached the q0 = 0 singularity."""


class DegenerateGeometryError(SoftdockError, ValueError):
    """Nonpositive orbital radius or similar degenerate geometry."""


class ParameterError(SoftdockError, ValueError):
    """Physical parameters violate their invariants (e.g. singular inertia)."""


class AllocationError(SoftdockError, ValueError):
    """Thruster configuration matrix is not full row rank."""


class ConvergenceError(SoftdockError, ArithmeticError):
    """An iterative solver failed to converge."""


class AssignmentError(SoftdockError, ArithmeticError):
    """Robust pole assignment could not produce a valid gain."""


class InputMatrixError(AssignmentError):
    """Input matrix B is rank deficient."""


class InfeasibleAssignmentError(AssignmentError):
    """A requested pole is an uncontrollable mode of (A, B)."""


class DegenerateSelectionError(AssignmentError):
    """Eigenvector selection never produced a nonsingular X."""


class IllConditionedSelectionError(AssignmentError):
    """Selected eigenvector matrix is too ill-conditioned to invert."""


class ConfigError(SoftdockError, ValueError):
    """Invalid scenario or perturbation configuration."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where += f"{field}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)
