"""Exception taxonomy for the trove library.

Every failure mode raised by the library derives from TroveError so callers
can catch one base class at pipeline boundaries while tests assert on the
specific leaf types.
"""


class TroveError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(TroveError, ValueError):
    """A function precondition on its arguments was violated."""


class BehindCameraError(TroveError):
    """Attempted to project a point at or behind the focal plane."""


class InvalidFeatureError(TroveError):
    """A ray/vertex configuration is geometrically impossible or ambiguous."""


class InconsistentAnglesError(TroveError):
    """Measured angles admit no real solution for the attitude."""


class InconsistentAttitudeError(TroveError):
    """An attitude matrix is incompatible with the observed feature."""


class NoConsistentInterpretationError(TroveError):
    """No candidate pairing across cameras agrees within the threshold."""


class AmbiguousHintError(TroveError):
    """A pitch hint cannot discriminate between candidate attitudes."""


class FeatureNotFoundError(TroveError):
    """Edge extraction produced no candidates for at least one edge."""


class LineNotFoundError(TroveError):
    """RANSAC could not find a line with enough inlier support."""


class DegenerateLinesError(TroveError):
    """The fitted lines do not intersect in a well-conditioned point."""


class UnreliableDepthError(TroveError):
    """Stereo disparity too small (or inverted) for a usable depth."""


class StreamError(TroveError):
    """Sensor stream violated ordering or rate constraints."""


class DatasetError(TroveError):
    """On-disk dataset is missing, malformed, or inconsistent."""


class PoseInvalidError(TroveError):
    """A requested render pose does not satisfy the visibility conditions."""


class ConfigError(TroveError):
    """A configuration file is malformed or contains unknown keys."""
