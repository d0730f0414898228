class LongCLError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(LongCLError, ValueError):
    pass


class ShapeError(LongCLError, ValueError):
    pass


class PreconditionError(LongCLError, ValueError):
    pass


class IngestionError(LongCLError, ValueError):
    """Raised while reading an external task stream.

    The message always names the offending file, and the line number when
    the problem is local to one record.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
