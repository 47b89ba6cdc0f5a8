"""Exception hierarchy shared by the solver modules."""


class EscError(Exception):
    """Base class for all package errors."""


class StructuralError(EscError, ValueError):
    """Array shapes or curve topology do not match what an operation needs."""


class ConfigurationError(EscError, ValueError):
    """Invalid model or solver parameters."""


class UnsupportedOperationError(EscError):
    """The operation is not defined for this model (e.g. 3D Wulff shape)."""


class InfeasibleConstraintError(EscError, ValueError):
    """The mass/box constraint set is empty."""


class SolverStalledError(EscError, RuntimeError):
    """Step size underflowed before the iteration converged."""


class InstabilityError(EscError, RuntimeError):
    """Time stepping produced non-finite values."""


class EmptyContourError(EscError, ValueError):
    """The field has no zero crossing."""
