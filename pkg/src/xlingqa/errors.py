"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage errors exit 1, data validation
errors exit 2, numerical failures exit 3.
"""


class XlingqaError(Exception):
    """Base class for all toolkit errors."""


class DataValidationError(XlingqaError):
    """Malformed or contract-violating input data."""


class NumericalError(XlingqaError):
    """Non-finite values or diverging optimization."""
