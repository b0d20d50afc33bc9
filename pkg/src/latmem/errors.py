"""Exception types shared across the simulator."""


class LatmemError(Exception):
    """Base class for all simulator errors."""


class ConfigError(LatmemError):
    """Invalid scenario or sweep configuration."""


class IntegrationFailure(LatmemError):
    """The carrier-wave integrator failed; carries the offending position."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class BandEdgeDegeneracyError(LatmemError):
    """One-period transfer matrix is defective (exact band-edge degeneracy)."""


class ModeOrthogonalityError(LatmemError):
    """Bilinear product of forward and conjugate carriers vanished before
    normalization, signalling an exact band-edge degeneracy."""


class TotalReflectionError(LatmemError):
    """Interface matching denominator vanished (total-reflection singularity)."""


class WalkOffTooLargeError(LatmemError):
    """Control/signal walk-off over the ensemble is too large for the
    analytic storage kernel; use the direct propagation solver instead."""


class StepSizeError(LatmemError):
    """Per-step self-consistency of the propagation scheme failed; refine
    the grid."""


class NumericalFailureError(LatmemError):
    """A matrix decomposition or iterative solver did not converge."""


class EfficiencyBoundError(LatmemError):
    """The kernel's largest singular value squared exceeded the physical
    efficiency bound (1 + discretization allowance); the envelope model is
    outside its validity range at this point."""
