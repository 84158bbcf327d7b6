"""Exception types shared across the package."""


class EvrestoreError(Exception):
    """Base class for all package errors."""


class GeometryError(EvrestoreError, ValueError):
    """Raised when spatial dimensions are incompatible with an operation."""


class TimeRangeError(EvrestoreError, ValueError):
    """Raised when a timestamp falls outside the valid interval."""


class ValidationError(EvrestoreError, ValueError):
    """Raised on invalid configuration or inconsistent metadata."""


class IntegrityError(EvrestoreError, RuntimeError):
    """Raised when a file on disk is truncated or corrupt."""


class DegenerateGeometryError(EvrestoreError, ValueError):
    """Raised when homography estimation has too few usable correspondences."""


class TrainingDivergedError(EvrestoreError, RuntimeError):
    """Raised when the training loss becomes non-finite."""
