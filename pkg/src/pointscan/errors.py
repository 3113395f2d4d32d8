"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: OSError -> 1,
ValidationError (and subclasses) -> 2, TrainingError -> 3.
"""


class PointscanError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PointscanError):
    """Invalid argument, configuration value, or malformed data."""


class ParseError(ValidationError):
    """Malformed input file.

    Carries the offending path and, when known, the 1-based line number.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: "
            if line is not None:
                where = f"{path}:{line}: "
        super().__init__(where + message)


class EmptyInputError(ParseError):
    """Input file contains no points."""


class TrainingError(PointscanError):
    """Optimization produced a non-finite loss; records the failing step."""

    def __init__(self, message: str, *, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
