"""Exception types raised across the package.

Each carries the process exit code the CLI maps it to.
"""


class TrailBayesError(Exception):
    exit_code = 1


class ParseError(TrailBayesError, ValueError):
    """A malformed input file or argument. ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class DimensionError(TrailBayesError, ValueError):
    exit_code = 4


class DegenerateHypothesisError(TrailBayesError, ValueError):
    exit_code = 5


class SuiteAssertionError(TrailBayesError, AssertionError):
    exit_code = 6
