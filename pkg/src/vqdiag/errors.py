"""Exception types shared across the package."""


class VqdiagError(Exception):
    """Base class for all package-specific errors."""


class ArgumentError(VqdiagError, ValueError):
    """An argument violates a documented precondition (shape, geometry, mode)."""


class DegenerateInputError(VqdiagError, ValueError):
    """Input is structurally valid but statistically degenerate (zero variance,
    single-class labels, constant scores)."""


class ConfigurationError(VqdiagError, ValueError):
    """A configuration value or combination is invalid."""


class GenerationError(VqdiagError, RuntimeError):
    """A data generator could not satisfy its contract within its retry budget."""


class ContractViolationError(VqdiagError, RuntimeError):
    """A training-stage contract (prerequisite or freeze set) was violated."""
