"""Exception types shared across the package."""


class TcdiagError(Exception):
    """Base class for package errors."""


class ConfigError(TcdiagError):
    """Invalid experiment configuration (CLI exit code 2)."""


class CapacityError(TcdiagError):
    """An exact enumeration would exceed its term-count / memory guard (CLI exit code 3)."""


class VerificationError(TcdiagError):
    """A verify-suite assertion failed (CLI exit code 1)."""


class UnsupportedModeError(TcdiagError):
    """A parameter combination the method does not cover (e.g. pinned negativity
    with both error types active)."""
