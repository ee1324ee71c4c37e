"""Exception hierarchy and the CLI exit codes attached to it.

Every error carries a short machine-parseable ``code`` so the CLI can emit a
single-line diagnostic and a stable exit status.
"""


class LicodecError(Exception):
    """Base class for all package errors."""

    code = "error"
    exit_status = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(LicodecError):
    """Invalid configuration: layer specs, weight shapes, group plans, flags."""

    code = "config"
    exit_status = 2


class CodecError(LicodecError):
    """Failure inside the coding pipeline."""

    code = "codec"
    exit_status = 3


class CodingRangeError(CodecError):
    """A symbol fell outside its frequency table's range."""

    code = "codec.symbol-range"


class TruncatedStreamError(CodecError):
    """The coded stream ended before all symbols were recovered."""

    code = "codec.truncated"


class ContainerError(CodecError):
    """Malformed container: bad magic, structure, or field values."""

    code = "codec.container"


class UnsupportedVersionError(ContainerError):
    code = "codec.version"


class ChecksumError(ContainerError):
    code = "codec.checksum"


class ModelMismatchError(CodecError):
    """Container was produced by a different model than the one supplied."""

    code = "codec.model-mismatch"


class MetricsError(LicodecError):
    """Invalid metric input: curve too short, no overlap, duplicate labels."""

    code = "metrics"
    exit_status = 2
