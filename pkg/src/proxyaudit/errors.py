"""Exception hierarchy. The CLI maps these onto exit codes."""

from __future__ import annotations


class ProxyAuditError(Exception):
    """Base class for every error raised by this package."""


class DataError(ProxyAuditError, ValueError):
    """Malformed input data: schema, CSV, or column references."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class StatsError(ProxyAuditError, ValueError):
    """A statistic is undefined for the given input."""


class FitError(ProxyAuditError):
    """Model fitting failed for numerical reasons."""


class SeparationError(FitError):
    """Complete or quasi-complete separation in a logistic fit."""


class ConvergenceError(FitError):
    """IRLS did not converge within the iteration cap."""


class CommitmentError(ProxyAuditError):
    """A model spec does not match its published commitment."""


class LockboxError(ProxyAuditError):
    """The lock-box rows no longer hash to the recorded digest."""
