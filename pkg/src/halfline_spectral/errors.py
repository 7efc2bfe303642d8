"""Exception types shared across the toolkit."""


class HalflineSpectralError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(HalflineSpectralError, ValueError):
    """Operands do not have compatible shapes."""


class NotPositiveDefiniteError(HalflineSpectralError, ValueError):
    """A matrix required to be positive definite is not."""


class InconsistentRankError(HalflineSpectralError, ValueError):
    """A caller-supplied rank exceeds the numerical rank by a clear margin."""


class BoundaryConditionError(HalflineSpectralError, ValueError):
    """Boundary matrices violate the selfadjointness conditions or need an invertible A."""


class PropagationError(HalflineSpectralError, RuntimeError):
    """ODE propagation produced non-finite values or an invalid step size."""


class TransformationInstabilityError(HalflineSpectralError, RuntimeError):
    """Bound-state removal detected a rank collapse or an identity violation."""


class PreconditionError(HalflineSpectralError, ValueError):
    """An operation was called on inputs that violate its stated precondition."""
