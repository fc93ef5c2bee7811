# errors.py


class SecRelayError(Exception):
    """Base class for every error raised by the simulator."""


class DomainError(SecRelayError, ValueError):
    """An input lies outside the physical domain of an operation."""


class ConfigError(SecRelayError, ValueError):
    """Invalid geometry, fading, experiment or channel configuration."""


class ConsistencyError(SecRelayError):
    """Two independent computations of the same quantity disagree."""
