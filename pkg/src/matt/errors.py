"""Exception hierarchy for the MATT pipeline.

Validation errors (bad input, bad config) map to CLI exit code 1; stage
errors (an external tool or a pipeline stage failed mid-run) map to exit
code 2.
"""


class MattError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(MattError):
    """Input or configuration rejected before any work ran."""


class InvalidParameterError(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed text input; carries the offending line/token when known."""

    def __init__(self, message: str, line: int | None = None, token: str | None = None):
        self.line = line
        self.token = token
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CorruptPayloadError(ValidationError):
    """RLE payload whose runs do not reconstruct the declared raster."""


class EmptyMaskError(ValidationError):
    """Mask with no foreground pixels where at least one is required."""


class InvalidCalibrationError(ValidationError):
    """Non-invertible affine calibration."""


class InsufficientDataError(ValidationError):
    """Too few correspondences to fit a transform."""


class DegenerateGeometryError(ValidationError):
    """Rank-deficient correspondence geometry (e.g. collinear points)."""


class OrphanMaskError(ValidationError):
    """Mask set whose pair_id has no matching frame pair."""

    def __init__(self, pair_ids: list[str]):
        self.pair_ids = pair_ids
        super().__init__(f"mask sets without a matching pair: {', '.join(sorted(pair_ids))}")


class EmptyStratumError(ValidationError):
    """No defined AP values to aggregate."""


class PairingError(ValidationError):
    """Band directory layout that cannot be paired (e.g. empty RGB dir)."""


class ConfigError(ValidationError):
    """Bad key or value in the run configuration."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        if key is not None:
            message = f"config key '{key}': {message}"
        super().__init__(message)


class StageError(MattError):
    """A pipeline stage failed; prior stages' artifacts remain on disk."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")


class NotFoundError(MattError):
    """Unknown pair_id or missing resource."""


class ConflictError(MattError):
    """Decision posted against an already-decided pair without re-review."""
