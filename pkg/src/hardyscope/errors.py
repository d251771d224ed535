"""Exception hierarchy shared by every module."""


class HardyscopeError(Exception):
    """Base class for all library errors."""


class InvalidModelError(HardyscopeError):
    """A space or operator failed its structural checks."""


class EvaluationError(HardyscopeError):
    """A scalar function was non-finite somewhere it must be evaluated."""


class NearSingularError(HardyscopeError):
    """A resolvent was requested too close to the spectrum."""


class ProfileError(HardyscopeError):
    """A profile produced non-finite values on a verification grid."""


class ResolutionError(HardyscopeError):
    """A sampled transform lost too much accuracy; a finer grid is needed."""


class PreconditionViolation(HardyscopeError):
    """Inputs violate the hypotheses an operation relies on."""


class EngineMismatch(HardyscopeError):
    """Two functional-calculus engines disagree beyond tolerance."""


class ContourResolutionError(HardyscopeError):
    """The truncated contour integral has an estimated residual above tolerance."""


class DegenerateProfileError(HardyscopeError):
    """A profile vanishes identically on a half-line."""


class GridTooNarrowError(HardyscopeError):
    """A log grid truncates too much of an improper integral."""


class GridCoverageError(HardyscopeError):
    """Part of the spectrum is not resolved by the log grid."""


class DegenerateGeometryError(HardyscopeError):
    """A ball of zero measure appeared where a positive one is required."""


class IncompatibleFieldsError(HardyscopeError):
    """Two tent fields live on different spaces or grids."""


class ConfigError(HardyscopeError):
    """An experiment configuration is invalid.

    Parameters
    ----------
    message : str
        Human readable description.
    pointer : str
        JSON pointer to the offending field.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
