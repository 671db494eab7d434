"""Exception types shared across the package."""


class DadsError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(DadsError, ValueError):
    """Invalid configuration: unknown ids, bad hyperparameters, shape mismatch."""


class DomainError(DadsError, ValueError):
    """A value outside the domain an operation accepts (e.g. a non-finite action)."""


class InputError(DadsError, ValueError):
    """Malformed input batch (empty, mismatched lengths, non-finite entries)."""


class StateError(DadsError, RuntimeError):
    """Operation called on an object in the wrong state."""


class PreconditionError(DadsError, ValueError):
    """A mathematical precondition does not hold (e.g. full support)."""


class OptimizerError(DadsError, FloatingPointError):
    """Non-finite gradient handed to the optimizer."""
