"""Exception types shared across the toolkit."""

from __future__ import annotations


class ToolError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ToolError, ValueError):
    """Invalid input data, configuration, or parameters."""


class GridError(ValidationError):
    """Grid cannot be constructed from the given node count."""


class DimensionError(ValidationError):
    """Vector length does not match the grid or parameter dimension."""


class DomainError(ValidationError):
    """Argument lies outside the admissible domain of an operation."""


class InfeasibleError(ValidationError):
    """A point violates feasibility beyond the permitted tolerance."""


class ConvergenceError(ToolError, RuntimeError):
    """An iterative solver failed to reach its exit criterion.

    Carries the best iterate seen so far and its residuals so callers can
    inspect partial results instead of losing the run.
    """

    def __init__(self, message: str, best=None, residuals: dict | None = None):
        super().__init__(message)
        self.best = best
        self.residuals = dict(residuals) if residuals else {}


class InsufficientPathError(ToolError):
    """A relaxation path does not contain enough successful iterates."""
