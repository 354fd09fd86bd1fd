"""Typed errors raised across the pipeline.

Every failure mode a caller may want to branch on gets its own class; all
inherit from SeamforgeError so batch drivers can catch one base type.
"""


class SeamforgeError(Exception):
    """Base class for all seamforge errors."""


class ParseError(SeamforgeError):
    """Malformed file content (header, row, or JSON structure)."""


class UnsupportedFormat(SeamforgeError):
    """File is recognizable but in a variant we deliberately do not read."""


class IoError(SeamforgeError):
    """Filesystem-level failure while reading or writing an artifact."""


class DimensionMismatch(SeamforgeError):
    """Image/cloud/mask dimensions disagree."""


class InvalidTransform(SeamforgeError):
    """Rotation block fails orthonormality beyond the ingest tolerance."""


class EmptyCloud(SeamforgeError):
    """Operation requires at least one valid point."""


class TooFewMasks(SeamforgeError):
    """Seam ROI construction needs at least two surface masks."""


class MissingCorrespondence(SeamforgeError):
    """Unorganized cloud given without intrinsics, so no pixel mapping exists."""


class MissingFeatures(SeamforgeError):
    """Cloud lacks the normals/curvatures a stage depends on."""


class DegenerateNeighborhood(SeamforgeError):
    """Neighborhood covariance has no usable extent (coincident points)."""


class DegenerateGeometry(SeamforgeError):
    """Fit input is geometrically degenerate (collinear, opposed normals, ...)."""


class FitRejected(SeamforgeError):
    """No in-plane model up to the allowed degree meets the residual tolerance."""


class NoSeamsFound(SeamforgeError):
    """Pipeline completed but produced zero seams; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnmatchedSeam(SeamforgeError):
    """A detected seam has no ground-truth curve within the match radius."""


class InvalidSpec(SeamforgeError):
    """Workpiece specification violates its constraints."""


class ConfigError(SeamforgeError):
    """Pipeline configuration is malformed; message names the offending key."""


class GimbalLockWarning(UserWarning):
    """Euler extraction hit |p| = 90 deg; a canonical decomposition was returned."""
