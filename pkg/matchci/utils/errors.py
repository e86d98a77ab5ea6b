"""Exception types. Each carries the process exit code the CLI maps it to."""

from typing import Optional, Tuple, Any

from matchci.config.settings import EXIT_CODES


class MatchCIError(Exception):
    exit_code = 1

    def __init__(self, message: str, *, line: Optional[int] = None, pair: Optional[Tuple[Any, ...]] = None):
        self.line = line
        self.pair = pair
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(MatchCIError):
    """Malformed, incomplete or unreadable input data."""
    exit_code = EXIT_CODES["parse_error"]


class InvalidInputError(MatchCIError, ValueError):
    """A precondition of an estimator or planner does not hold."""
    exit_code = EXIT_CODES["precondition"]


class ResamplingError(MatchCIError):
    """Resampling could not produce a valid replicate."""
    exit_code = EXIT_CODES["resampling"]
