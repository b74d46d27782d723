"""Exception hierarchy shared across the package."""


class CarnotLabError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatch(CarnotLabError, ValueError):
    """Operands live on different coordinate spaces."""


class UnsupportedStep(CarnotLabError, ValueError):
    """Group law requested beyond the step-4 BCH truncation."""


class UnsupportedGroup(CarnotLabError, ValueError):
    """No implementation for this group (e.g. no closed heat kernel)."""


class SpecFileError(CarnotLabError, ValueError):
    """Group spec file is malformed or violates a structural invariant."""


class QuadratureNotConverged(CarnotLabError, RuntimeError):
    """Panel doubling or tail extension failed to reach tolerance."""


class NumericalUnderflow(CarnotLabError, RuntimeError):
    """Kernel value below the representable floor (p < 1e-280)."""


class SchemeUnsupported(CarnotLabError, ValueError):
    """Sampling scheme not valid for this group's step."""


class DimensionTooLarge(CarnotLabError, ValueError):
    """Tensor-grid quadrature refused (group dimension too large)."""


class ExcessiveRejection(CarnotLabError, RuntimeError):
    """Too many Monte Carlo samples rejected (underflow fraction >= 1e-4)."""


class MinimizationFailed(CarnotLabError, RuntimeError):
    """Isoperimetric intermediate bound could not be satisfied at any t."""
