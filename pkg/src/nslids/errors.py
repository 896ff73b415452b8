"""Exception hierarchy. The CLI maps each family to an exit code."""


class NslIdsError(Exception):
    """Base class for pipeline errors."""


class DataError(NslIdsError):
    """Bad or inconsistent input data, caches or artifacts."""


class ParseError(DataError):
    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


class TrainingError(NslIdsError):
    """Numerical failure during optimisation."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class DimensionError(DataError, ValueError):
    """Array shapes that do not fit a network, schema or target layout."""
