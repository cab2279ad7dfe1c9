"""Exception types shared across the package."""


class MirrorShapeError(Exception):
    """Base class for all package-specific errors."""


class EmptyMesh(MirrorShapeError):
    """Raised when a geometric query is issued against a mesh with no triangles."""


class InvalidTriangle(MirrorShapeError):
    """Raised when a triangle index is out of range or the point is not on it."""


class MeshLoadError(MirrorShapeError):
    """Raised for malformed mesh files; carries the offending line number."""

    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NonMonotonicTimestamp(MirrorShapeError):
    """Raised when a tracking frame does not advance the stream clock."""


class DegenerateConfiguration(MirrorShapeError):
    """Raised for unsolvable geometric configurations (collinear point sets,
    folded linkages, non-intersecting link circles)."""


class InvalidHysteresis(MirrorShapeError):
    """Raised when contact event thresholds do not satisfy d_off > d_on > 0."""


class Unreachable(MirrorShapeError):
    """IK target outside the reachable workspace. Carries the best residual."""

    def __init__(self, message, pos_error=None, rot_error=None):
        super().__init__(message)
        self.pos_error = pos_error
        self.rot_error = rot_error


class NoConvergence(MirrorShapeError):
    """IK iteration cap hit while close to the target. Carries the best residual."""

    def __init__(self, message, pos_error=None, rot_error=None):
        super().__init__(message)
        self.pos_error = pos_error
        self.rot_error = rot_error


class LimitViolation(MirrorShapeError):
    """IK converged but no joint-limit-respecting representative exists."""


class OutOfWorkspace(MirrorShapeError):
    """Linkage target outside the annular five-bar workspace."""


class MalformedMessage(MirrorShapeError):
    """Wire message failed validation (bad JSON, missing field, wrong arity)."""


class SafetyStop(MirrorShapeError):
    """Command rejected outright; the plant must hold position."""


class ConfigError(MirrorShapeError):
    """Scenario or module configuration is invalid (includes unknown keys)."""
