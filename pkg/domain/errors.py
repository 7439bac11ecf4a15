"""
Exception hierarchy for the pose pipeline.

Every error the pipeline raises on purpose derives from SelfPoseError, so the
CLI can turn them into a single machine-readable stderr line.
"""


class SelfPoseError(Exception):
    """Base class for all pipeline errors."""


class CalibrationError(SelfPoseError, ValueError):
    """A camera calibration violates its invariants or carries a distortion model."""


class BehindCamera(SelfPoseError):
    """A point lies at or behind the camera plane."""


class SingularTransform(SelfPoseError, ValueError):
    """An affine augmentation has no inverse."""


class ShapeMismatch(SelfPoseError, ValueError):
    """Tensor shapes disagree with what an operation expects."""


class DegenerateConfiguration(SelfPoseError):
    """Triangulation inputs do not determine a unique point."""


class InvalidSigma(SelfPoseError, ValueError):
    """Gaussian width must be positive."""


class InvalidBeta(SelfPoseError, ValueError):
    """Soft-argmax inverse temperature must be positive."""


class WorkspaceTooCrowded(SelfPoseError):
    """Rejection sampling could not place persons with the required separation."""


class TooFewViews(SelfPoseError, ValueError):
    """Hard view attention needs at least two views."""


class IndexOutOfRange(SelfPoseError, IndexError):
    """A channel or joint index is outside the valid range."""


class NoMatches(SelfPoseError):
    """No prediction could be matched to any pseudo label."""


class StageOrderViolation(SelfPoseError):
    """A training stage was requested before its prerequisite checkpoint exists."""


class DivergenceDetected(SelfPoseError):
    """A training loss became non-finite."""


class EmptyDataset(SelfPoseError, ValueError):
    """An operation that needs data received none."""


class FormatError(SelfPoseError, ValueError):
    """A file does not follow the expected on-disk format."""
