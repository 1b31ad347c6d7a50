"""Exception hierarchy shared by all stages."""


class GridshedError(Exception):
    pass


class ParseError(GridshedError, ValueError):
    """Malformed CSV content; ``line`` is the 1-based line number."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class SchemaError(GridshedError, ValueError):
    pass


class ValidationError(GridshedError, ValueError):
    pass


class IndexUndefinedError(GridshedError, ValueError):
    """A validity index cannot be computed for the given partition."""


class FitError(GridshedError, RuntimeError):
    pass


class ConfigError(GridshedError, ValueError):
    pass
