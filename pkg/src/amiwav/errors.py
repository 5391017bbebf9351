"""Exception hierarchy shared by every module.

Each class maps onto one error category of the pipeline so callers (and the
CLI) can tell bad arguments apart from bad data or damaged files.
"""


class AmiwavError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(AmiwavError, ValueError):
    """A parameter is out of range or inconsistent with the input."""


class DataError(AmiwavError, ValueError):
    """Input values are unusable (non-finite, negative, malformed rows)."""


class StructureError(AmiwavError, ValueError):
    """A coefficient pyramid or model has inconsistent shapes or counts."""


class DegenerateProfileError(AmiwavError, ValueError):
    """A profile cannot be normalized or scaled (all zeros)."""


class UndefinedMetricError(AmiwavError, ValueError):
    """A metric has no meaningful value for the given inputs."""


class NotFoundError(AmiwavError, KeyError):
    """A requested customer is not present in a model."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class CorruptFileError(AmiwavError):
    """A model file has a bad header or a body that disagrees with it."""


class UnsupportedVersionError(CorruptFileError):
    """A model file declares a format version this build cannot read."""
