"""Exception types raised across the swapping pipeline."""


class PartSwapError(Exception):
    """Base class for all pipeline errors."""


class ModelFormatError(PartSwapError):
    """Malformed or inconsistent morphable-model data.

    `field` names the offending model field so loaders can report
    precisely what is broken.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DegenerateGeometryError(PartSwapError):
    """3D point configuration too degenerate for camera estimation."""


class DegenerateCameraError(PartSwapError):
    """Camera rows are zero or parallel; no rotation can be extracted."""


class SingularSystemError(PartSwapError):
    """Coefficient normal equations are singular (rank-deficient, lambda=0)."""


class DegenerateHullError(PartSwapError):
    """Point cloud admits no 3D convex hull (coincident/coplanar points)."""


class SingularWarpError(PartSwapError):
    """Triangle too small or collinear to define an affine warp."""


class ConvergenceError(PartSwapError):
    """Iterative solver stopped before reaching the requested tolerance."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (final relative residual {residual:.3e})")


class UnknownPartError(PartSwapError):
    """Requested part name is not one of the model's labeled regions."""
