"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent sizes, horizons or experiment configuration."""


class ParameterDomainError(ValueError):
    """A numeric parameter lies outside its admissible range."""


class ContractViolation(RuntimeError):
    """A caller broke a state contract, e.g. re-recommending a consumed item."""


class ExhaustedError(RuntimeError):
    """A user has no unconsumed item left."""


class UnsupportedModeError(RuntimeError):
    """The operation needs ground truth that the environment does not have."""


class FormatError(ValueError):
    """Too many malformed lines in a ratings dump."""
