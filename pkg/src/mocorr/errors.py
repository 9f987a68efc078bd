"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI: ParseError/ConfigError and plain I/O
errors exit 2, numeric failures exit 1.
"""


class MocorrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MocorrError, ValueError):
    """Caller passed structurally invalid data (shape/range/dimension)."""


class SequenceTooShortError(InvalidInputError):
    """Temporal operation received fewer frames than it supports."""


class BehindCameraError(MocorrError):
    """Point at or behind the camera plane cannot be projected."""


class EmptySilhouetteError(MocorrError):
    """No capsule outline is visible for the requested pose."""


class UnfittableError(MocorrError):
    """Observations carry no usable keypoints in any frame."""


class NumericFailureError(MocorrError):
    """Non-finite value encountered; message names the site (layer/epoch/batch)."""


class ParseError(MocorrError):
    """File could not be parsed; message carries path and field/line context."""


class UnsupportedVersionError(ParseError):
    """File declares a format version this build does not read."""


class ConfigError(MocorrError):
    """Configuration value out of range or missing."""
