"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`GeoPhaseError`; the CLI maps ``type(err).__name__`` into its report.
"""


class GeoPhaseError(Exception):
    """Base class for all library errors."""

    #: exit code used by the command line driver
    exit_code = 1


class ConfigInvalid(GeoPhaseError):
    exit_code = 2


class ModelUnknown(ConfigInvalid):
    pass


class DegenerateLoop(GeoPhaseError, ValueError):
    pass


class PivotSingular(GeoPhaseError):
    """The chosen minor ``H_perp - E`` is (numerically) singular."""

    def __init__(self, message, pivot=None, det=None):
        super().__init__(message)
        self.pivot = pivot
        self.det = det


class LevelMismatch(GeoPhaseError):
    pass


class LevelCrossing(GeoPhaseError):
    """The tracked level came closer than ``gap_tol`` to a neighbour."""


class EnergyDrift(GeoPhaseError):
    pass


class PoleCrossing(GeoPhaseError):
    pass


class DegenerateMinor(GeoPhaseError):
    pass


class DomainViolation(GeoPhaseError):
    pass


class DegenerateSpectrum(GeoPhaseError):
    pass


class MultiplicityDrift(GeoPhaseError):
    pass


class FrameDiscontinuity(GeoPhaseError):
    pass


class NonClosedGauge(GeoPhaseError):
    pass


class EchoMismatch(GeoPhaseError):
    pass


class StepTooCoarse(GeoPhaseError):
    pass


class LeakageExceeded(GeoPhaseError):
    def __init__(self, message, leakage=None):
        super().__init__(message)
        self.leakage = leakage


class InvariantViolation(GeoPhaseError):
    """A result failed a unitarity/hermiticity check before being reported."""
