"""Exception types shared across the package."""


class TunnelSplitError(Exception):
    """Base class for all package errors."""


class UnsupportedOrderError(TunnelSplitError):
    """A derivative of higher order than the stored closed forms was requested."""


class UnsupportedFormError(TunnelSplitError):
    """A Hamiltonian outside the supported closed-form families was supplied."""


class ValidationError(TunnelSplitError):
    """A declared structural invariant failed its numerical check."""


class ToleranceError(TunnelSplitError):
    """A quadrature did not reach the requested tolerance.

    Carries the best estimate and the achieved error bound.
    """

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved


class SingularTorusError(TunnelSplitError):
    """The invariant curve degenerates at this energy (separatrix)."""


class TangencyError(TunnelSplitError):
    """A non-smoothness line is tangent to the torus; the path formula diverges."""


class SingularPathError(TunnelSplitError):
    """A transition path has zero length or a vanishing endpoint velocity."""


class ProjectionError(TunnelSplitError):
    """The requested coordinate lies outside the projection of the torus branch."""


class DivergentSumError(TunnelSplitError):
    """The periodized inverse-power sum diverges for this argument."""


class BasisCapError(TunnelSplitError):
    """Basis-size doubling exceeded the configured hard cap before converging."""


class EigensolverError(TunnelSplitError):
    """The dense eigensolver failed to converge."""

    def __init__(self, message, info=None):
        super().__init__(message)
        self.info = info


class ConfigError(TunnelSplitError):
    """Invalid run configuration or out-of-range parameter."""
