"""Exception types shared across the library."""


class ShrinkMpcError(Exception):
    """Base class for all library errors."""


class DimensionError(ShrinkMpcError):
    """Operands have incompatible dimensions."""


class SingularityError(ShrinkMpcError):
    """A state (or state box) reached a region where the model is not evaluable."""


class InitialTrajectoryError(ShrinkMpcError):
    """No valid initial reference trajectory could be found offline."""


class ConfigError(ShrinkMpcError):
    """Scenario configuration file is malformed or contains unknown keys."""
