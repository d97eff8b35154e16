"""Exception types shared across the toolkit."""


class ClickKitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(ClickKitError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(ClickKitError, ValueError):
    """A configuration value is out of its documented range."""


class ParseError(ClickKitError, ValueError):
    """A text file could not be parsed.

    ``line`` is the 1-based line number of the offending record, if known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ModelLoadError(ClickKitError):
    """A serialized forest model is corrupt or has an unsupported version."""


class DegenerateModelError(ClickKitError, ValueError):
    """Training data cannot produce a useful classifier (e.g. one class)."""
