"""Exception types raised across the package."""


class QKDError(Exception):
    """Base class for package errors."""


class DomainError(QKDError, ValueError):
    """A parameter lies outside its allowed range."""


class InvalidSettingError(QKDError, ValueError):
    """A measurement setting is not allowed by the protocol in use."""


class FitError(QKDError, RuntimeError):
    """Visibility fit could not be performed."""


class MalformedFrameError(QKDError, ValueError):
    """A wire frame could not be decoded."""


class ChannelClosedError(QKDError, ConnectionError):
    """The classical channel was closed by the peer."""


class ConfigError(QKDError, ValueError):
    """Run configuration failed validation."""
