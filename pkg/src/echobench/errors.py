"""Exception types shared across the workbench."""


class EchobenchError(Exception):
    """Base class for all workbench errors."""


class ConfigurationError(EchobenchError):
    """Invalid configuration or incompatible shapes."""


class UsageError(EchobenchError):
    """API misuse: bad action index, double backward, non-scalar loss."""


class ConstructionError(EchobenchError):
    """Reservoir construction cannot proceed (e.g. all-zero matrix)."""


class NonFiniteError(EchobenchError):
    """A NaN or Inf showed up where the run must abort loudly."""
