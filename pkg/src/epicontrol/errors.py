"""Exception types shared across the package."""


class EpiControlError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(EpiControlError):
    """Invalid configuration value or unknown preset/baseline/checkpoint name."""


class ContractError(EpiControlError):
    """A caller violated an operation precondition (shape, range, staleness)."""


class NumericError(EpiControlError):
    """A non-finite value appeared where a finite one is required."""
