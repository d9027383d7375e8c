"""Exception hierarchy for the estimation toolkit"""

from typing import Optional


class ModelError(Exception):
    """Base class for all errors raised by the toolkit"""


class DataError(ModelError, ValueError):
    """Problem with the input dataset"""


class SchemaError(DataError):
    """A required column is missing"""

    def __init__(self, column: str, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"Missing required column: {column!r}")


class ValidationError(DataError):
    """Dataset violates a structural invariant"""

    def __init__(self, message: str, subject_id=None):
        self.subject_id = subject_id
        if subject_id is not None:
            message = f"Subject {subject_id}: {message}"
        super().__init__(message)


class ParseError(DataError):
    """Value could not be parsed as a finite number"""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"Row {row}: {message}"
        super().__init__(message)


class InsufficientSampleError(ModelError, ValueError):
    """Not enough observations for the requested computation"""


class CovarianceError(ModelError, ValueError):
    """Working covariance cannot be estimated or materialized"""


class IdentifiabilityError(ModelError):
    """Fewer estimating functions than parameters, or a singular system"""


class NumericalError(ModelError, ArithmeticError):
    """Non-finite input or factorization failure"""


class ConvergenceError(ModelError):
    """Solver could not start or make progress"""


class StudyError(ModelError):
    """Every replication in a simulation study failed"""
