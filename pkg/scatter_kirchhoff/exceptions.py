"""
Error hierarchy for the scattering library

Precondition failures derive from ValueError, numerical failures from
ArithmeticError or RuntimeError, so callers can catch either the builtin
family or ScatterError. Each class carries a stable ``code`` used in the
CLI's machine-readable error record.
"""


class ScatterError(Exception):
    """Base class for every error raised by scatter_kirchhoff"""

    code = "scatter_error"


class EmptySceneError(ScatterError, ValueError):
    """Scene has no obstacles"""

    code = "empty_scene"


class OverlapError(ScatterError, ValueError):
    """Two obstacles intersect, touch or contain one another"""

    code = "overlap"


class OffSurfaceError(ScatterError, ValueError):
    """A point handed to a surface routine is not on that surface"""

    code = "off_surface"


class ResourceError(ScatterError, RuntimeError):
    """A grid or enumeration would exceed the configured caps"""

    code = "resource"


class SingularError(ScatterError, ArithmeticError):
    """A matrix that must be inverted is numerically singular"""

    code = "singular"


class TangencyError(ScatterError, ArithmeticError):
    """A ray meets a surface tangentially where a transversal hit is required"""

    code = "tangency"


class NoConvergence(ScatterError, RuntimeError):
    """An iterative solver ran out of iterations"""

    code = "no_convergence"


class SignViolation(ScatterError, ValueError):
    """A stationary path violates an illumination sign condition"""

    code = "sign_violation"


class CausticError(ScatterError, ArithmeticError):
    """The observation point lies on or near a caustic or a grazing set"""

    code = "caustic"


class NearBoundaryError(ScatterError, ValueError):
    """Observation point is inside an obstacle or within the boundary layer"""

    code = "near_boundary"


class ConvergenceError(ScatterError, ArithmeticError):
    """A truncated series has not converged to the requested tolerance"""

    code = "series_convergence"


class ConfigError(ScatterError, ValueError):
    """Run configuration is malformed or inconsistent"""

    code = "config"


class ValidationFailed(ScatterError, RuntimeError):
    """A validation sweep exceeded its residual thresholds"""

    code = "validation_failed"
