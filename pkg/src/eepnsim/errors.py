"""Exception hierarchy shared by all eepnsim modules."""


class EepnsimError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(EepnsimError, ValueError):
    """An argument violates an operation's contract (range, length, format)."""


class ConfigurationError(EepnsimError, ValueError):
    """A processing or run configuration is inconsistent (block sizes,
    overlaps, bandwidth budgets, unknown config keys)."""


class EstimationError(EepnsimError, RuntimeError):
    """An estimator received degenerate data (all-zero block, rank-deficient
    weighted fit)."""


class DesignError(EepnsimError, RuntimeError):
    """A filter design target is unrealizable with the requested taps."""
