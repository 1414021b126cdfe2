"""Exception types raised across the package."""


class GefSplitError(Exception):
    """Base class for package errors."""


class PreconditionError(GefSplitError, ValueError):
    """An argument violates an operation's precondition."""


class ExtentError(GefSplitError):
    """The noise lattice does not cover the kernel support around the evaluation region."""


class OverflowRiskError(GefSplitError):
    """A point lies outside the numerically stable range of the series evaluation."""


class WindingMismatch(GefSplitError):
    """Argument-principle count disagrees with the number of located roots."""

    def __init__(self, winding, found, radius):
        super().__init__(f"winding count {winding} != {found} roots found in |z| <= {radius}")
        self.winding = winding
        self.found = found
        self.radius = radius


class SupportError(GefSplitError):
    """The test function support exceeds the radius where zeros are reliable."""


class QuadratureError(GefSplitError):
    """Two quadrature refinements disagree by more than the allowed margin."""


class SlowConvergence(GefSplitError):
    """Dyadic shell contributions do not decay for parameters that should converge."""


class InsufficientSamples(GefSplitError):
    """Too few samples for the requested estimator."""


class ConfigError(GefSplitError):
    """Experiment configuration could not be parsed or validated."""
