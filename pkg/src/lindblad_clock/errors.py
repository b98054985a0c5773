"""Exception hierarchy shared across the package."""


class ClockError(Exception):
    """Base class for all package errors."""


class InputError(ClockError, ValueError):
    """Malformed or inconsistent input (shapes, non-finite entries, bad ranges)."""


class PreconditionError(InputError):
    """An operation was called outside its documented domain."""


class InvalidStateError(InputError):
    """A matrix does not describe a physical density matrix."""


class NumericalFailure(ClockError, RuntimeError):
    """A computation finished but its result violates a required invariant."""


class GridTooCoarseError(InputError):
    def __init__(self, message: str, required_points: int):
        super().__init__(message)
        self.required_points = required_points


class UnderResolvedError(InputError):
    def __init__(self, message: str, required_steps: int):
        super().__init__(message)
        self.required_steps = required_steps


class SchemaError(InputError):
    """A serialized document failed validation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
