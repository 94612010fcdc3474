"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


class SingularityError(ArithmeticError):
    """A symmetric factorization hit a non-positive pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ScaleError(ValueError):
    """A scaling factor is zero, negative or undefined."""


class ConfigError(ValueError):
    """Invalid configuration value."""


class DataError(ValueError):
    """Invalid or empty data."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class SchemaError(DataError):
    pass


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
