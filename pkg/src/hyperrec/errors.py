"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument is non-finite or otherwise malformed."""


class OutOfBallError(ValueError):
    """Raised when a point violates the open-ball constraint of its curvature."""


class NumericalError(ArithmeticError):
    """Raised when a computation degenerates (tiny denominator, non-finite result)."""


class DataFormatError(ValueError):
    """Raised for malformed or empty interaction/candidate/embedding files."""


class SamplingExhaustedError(RuntimeError):
    """Raised when rejection sampling cannot find a valid item within the retry budget."""


class ConfigError(ValueError):
    """Raised for invalid configuration values; the message names the offending field."""
