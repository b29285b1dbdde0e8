"""Exception types shared across the package."""


class OpenTCError(Exception):
    """Base class for all package-specific errors."""


class SpaceTooLargeError(OpenTCError):
    """Requested Hilbert space exceeds the vectorized-Liouvillian budget."""


class SpaceMismatchError(OpenTCError):
    """Operation between objects living on different Hilbert spaces."""


class ZeroIntensityError(OpenTCError):
    """Correlation function requested for a field with no intensity."""


class NonUniqueSteadyStateError(OpenTCError):
    """The Liouvillian null space has dimension larger than one."""


class SteadyStateConvergenceError(OpenTCError):
    """The steady-state solve did not reach the requested residual."""


class CutoffConvergenceError(OpenTCError):
    """Photon-number cutoff scan hit the space-size cap before converging."""


class IntegrationError(OpenTCError):
    """Time integration failed; carries the time at which it stopped."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class StateValidationError(OpenTCError):
    """Density matrix violates a Hermiticity/trace/positivity tolerance."""


class SiteSymmetryError(OpenTCError):
    """Per-emitter populations differ although the model is exchange symmetric."""


class InsufficientSamplesError(OpenTCError):
    """Trajectory ensemble produced too few effective samples."""


class ConfigError(OpenTCError):
    """Invalid sweep configuration (bad key, bad value, missing field)."""
