"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or build parameters (bad order, mesh size, keys...)."""


class NumericalError(RuntimeError):
    """A numerical invariant failed at runtime (inadmissible state, singular transform...)."""
