"""Exception types shared across the package."""


class GradLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GradLabError, ValueError):
    """A mathematically invalid input: wrong sign, asymmetry, out-of-range value."""


class StructuralError(GradLabError, ValueError):
    """A structurally invalid call: dimension mismatch, missing history, bad sequencing."""


class ConfigError(GradLabError, ValueError):
    """An invalid experiment configuration; the message names the offending field."""


class ConvergenceSignal(GradLabError):
    """Raised when an operation receives a gradient that has already converged to zero.

    Stepsizes are undefined at the minimizer; callers are expected to stop a run
    before asking for the next stepsize.
    """
