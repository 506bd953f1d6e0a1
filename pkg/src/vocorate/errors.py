"""Exception taxonomy shared by every module.

The CLI maps these onto process exit codes: validation problems exit 1,
numeric failures exit 2, file-format and I/O trouble exit 3.
"""


class ValidationError(ValueError):
    """Bad shapes, bad parameters, malformed structures, invalid configs."""


class NumericError(ArithmeticError):
    """NaN/Inf or otherwise non-finite values where finite ones are required."""


class FormatError(ValueError):
    """Corrupt, truncated, or unsupported-version files."""
