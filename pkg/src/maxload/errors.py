"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class MaxLoadError(Exception):
    """Base class for all package errors."""


class DomainError(MaxLoadError, ValueError):
    """An argument lies outside the domain of an operation."""


class InstanceFormatError(DomainError):
    """An instance file is malformed. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"field {field!r}: {message}")


class CapExceededError(MaxLoadError):
    """A configured size cap refuses the requested computation."""


class InvariantViolation(MaxLoadError, RuntimeError):
    """A numeric invariant that must hold by construction was violated."""
