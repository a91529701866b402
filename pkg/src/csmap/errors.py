"""Exception types shared across the package."""


class CSMError(Exception):
    """Base class for all csmap errors."""


class DegeneratePoint(CSMError):
    """Point cannot be projected onto the target (integrator step too large)."""


class NoConvergence(CSMError):
    """Fixed-point solve exceeded max iterations; the time step is too large."""

    def __init__(self, msg, step_index=None):
        super().__init__(msg)
        self.step_index = step_index


class BandOutOfRange(CSMError):
    """Dyadic band index outside the grid's resolvable range."""


class NegativeTime(CSMError):
    """Heat propagator requires s >= 0."""


class IncompatibleBoost(CSMError):
    """Boost velocity not on the lattice that keeps the half-phase periodic."""


class TooFewSlices(CSMError):
    """Residual evaluation needs at least three trajectory slices."""


class EnergyAboveThreshold(CSMError):
    """Sphere-target data at or above the ground-state energy 4*pi."""


class FrameDrift(CSMError):
    """Re-orthonormalization correction too large; s-grid too coarse."""


class MissingSlices(CSMError):
    """Operation needs neighbor slices (in t or s) that are not present."""


class TailTooLarge(CSMError):
    """Truncated s-integral tail exceeds the accepted fraction of the result."""


class ExponentTooSmall(CSMError):
    """Summation-rule exponent must exceed the envelope parameter delta."""


class TooFewSamples(CSMError):
    """Decay fit needs more samples in the fitting window."""


class ScenarioTargetMismatch(CSMError):
    """Scenario is not defined for the requested target manifold."""


class BadMagic(CSMError):
    """Snapshot file does not start with the expected magic bytes."""


class TruncatedPayload(CSMError):
    """Snapshot payload shorter than the header promises."""


class ConstraintViolation(CSMError):
    """Field values off the target manifold beyond tolerance."""


class ConfigError(CSMError):
    """Malformed or inconsistent run configuration."""
