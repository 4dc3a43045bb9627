"""Exception hierarchy shared by every module."""


class FresqoError(Exception):
    pass


class InvalidDimensionError(FresqoError, ValueError):
    pass


class EmbeddingError(FresqoError, ValueError):
    pass


class InvalidParameterError(FresqoError, ValueError):
    pass


class ModelConstructionError(FresqoError, ValueError):
    pass


class NumericalError(FresqoError, RuntimeError):
    """A linear solve or propagation failed its residual check."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateSteadyStateError(NumericalError):
    pass


class StiffnessError(NumericalError):
    pass


class UndefinedCorrelationError(FresqoError, ArithmeticError):
    pass


class UndefinedCSIError(UndefinedCorrelationError):
    pass


class ConfigError(FresqoError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
