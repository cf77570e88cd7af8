"""Exception types shared across the package."""


class VoxfuseError(Exception):
    """Base class for all voxfuse errors."""


class ConfigurationError(VoxfuseError):
    """Inconsistent inputs or invalid run configuration."""


class FormatError(VoxfuseError):
    """Malformed or corrupt data file."""


class InvalidInputError(VoxfuseError):
    """Numerically invalid operand (non-finite, non-unit, out of range)."""


class ProjectionError(VoxfuseError):
    """Degenerate camera projection (point on the image plane)."""


class RankDeficiencyError(VoxfuseError):
    """Degenerate point configuration in an alignment problem."""


class AlignmentError(VoxfuseError):
    """Paired per-frame inputs do not cover the same frame set."""
