"""Exception types shared across the library."""


class MonitoredShadowsError(Exception):
    """Base class for library errors."""


class ImpossibleRecord(MonitoredShadowsError):
    """A forced measurement outcome has zero Born probability: the record
    is inconsistent with the circuit it is being replayed on."""


class NonInvertible(MonitoredShadowsError):
    """The shadow channel cannot be inverted (average purity at or below
    the fully-mixed value: the measurement record carries no information)."""


class Unlearnable(MonitoredShadowsError):
    """The requested observable lies in (or too close to) the kernel of
    the shadow channel; no number of samples can estimate it."""


class LowESS(MonitoredShadowsError):
    """An importance-weighted estimate has too few effective samples."""


class LowESSWarning(UserWarning):
    """Importance-weighted average resolved by very few effective samples."""


class NoCrossing(MonitoredShadowsError):
    """A sharpening curve never reaches the requested threshold inside the
    simulated time window."""


class DegenerateWeingarten(MonitoredShadowsError):
    """Third-moment Weingarten functions are singular (D <= 2)."""


class ResourceGuard(MonitoredShadowsError):
    """A requested computation exceeds configured resource limits."""


class ConfigError(MonitoredShadowsError):
    """An experiment configuration is malformed."""
