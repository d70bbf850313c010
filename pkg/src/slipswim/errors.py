"""Exception and warning types shared across the package."""


class SlipswimError(Exception):
    """Base class for all package errors."""


class GeometryError(SlipswimError):
    """Invalid surface geometry (open mesh, bad dimensions, missing shape info)."""


class MeshFormatError(GeometryError):
    """Unreadable or unsupported mesh file content."""


class PlacementError(SlipswimError):
    """Interior source placement failed (source landed outside the body)."""


class SingularEvaluationError(SlipswimError):
    """A kernel was evaluated at (or too close to) its singular point."""


class SolverError(SlipswimError):
    """Collocation or linear-algebra failure (degenerate system, indefinite matrix)."""


class BasisRankError(SolverError):
    """The six traction fields are numerically rank deficient."""


class ConfigError(SlipswimError):
    """Invalid run configuration."""


class ConditioningWarning(UserWarning):
    """Emitted when a parameter choice is likely to produce an ill-conditioned system."""


class AccuracyWarning(UserWarning):
    """Emitted when an a-posteriori residual exceeds its target tolerance."""
