"""Shared exception types."""


class InputError(ValueError):
    """An operation was called with invalid or out-of-contract inputs."""


class UnsupportedConfiguration(InputError):
    """The requested configuration is outside the supported scope."""


class PreconditionError(InputError):
    """A stated numerical precondition does not hold for the inputs."""


class LowConfidenceDirection(RuntimeError):
    """A direction estimate failed its confidence gate."""


class EstimateFailure(RuntimeError):
    """An estimator run failed its own validity diagnostics."""
