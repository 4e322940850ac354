"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, counts, weights, or option combos."""


class DomainError(ValueError):
    """Evaluation point lies outside the problem domain."""


class NumericError(FloatingPointError):
    """Non-finite value encountered during evaluation or training."""


class TapeUsageError(RuntimeError):
    """Tape misuse, e.g. calling backward twice on a consumed tape."""


class DegenerateStateError(ArithmeticError):
    """A trial state collapsed (vanishing norm / Rayleigh denominator)."""


class MetricError(ValueError):
    """Metric is undefined for the given inputs (e.g. zero reference norm)."""
