"""Exception hierarchy shared by the package."""

from __future__ import annotations


class ApproachabilityError(Exception):
    """Base class for all package errors."""


class ModelError(ApproachabilityError, ValueError):
    """Invalid game model, strategy, or configuration document."""


class GeometryError(ApproachabilityError, RuntimeError):
    """Projection onto the target failed to converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class SolverError(ApproachabilityError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class AssumptionViolated(ApproachabilityError):
    """No separating strategy exists at a point outside the target."""

    def __init__(self, message: str, point=None, margin: float = float("nan")):
        super().__init__(message)
        self.point = point
        self.margin = margin
