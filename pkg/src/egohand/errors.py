"""Exception hierarchy.

Every error carries a CLI exit category: data problems exit with 4,
numerical failures with 5. I/O errors are the builtin ``OSError``.
"""


class EgoHandError(Exception):
    exit_code = 1


class DataError(EgoHandError, ValueError):
    exit_code = 4


class NumericError(EgoHandError, ArithmeticError):
    exit_code = 5


class FrameMismatch(DataError):
    pass


class JointCountMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class InvalidParams(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantViolation(ParseError):
    """A well-formed line whose record breaks a format invariant."""

    def __init__(self, message: str, key=None, line: int | None = None):
        self.key = key
        self.detail = message
        if key is not None:
            message = f"record {key}: {message}"
        super().__init__(message, line)


class NonPositiveDepth(NumericError):
    pass


class NoConvergence(NumericError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class OutOfModelRange(NumericError):
    pass


class InfeasibleRig(NumericError):
    pass
