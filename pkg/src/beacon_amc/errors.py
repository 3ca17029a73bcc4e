"""Exception types shared across the package."""


class FileError(ValueError):
    """Base class for binary file I/O failures."""


class FileFormatError(FileError):
    """Magic bytes, version, or header fields are not what the format requires."""


class FileTruncatedError(FileError):
    """The file ends before the payload promised by its header."""


class FileChecksumError(FileError):
    """The stored CRC32 does not match the payload."""


class StaleCacheError(RuntimeError):
    """A cached activation refers to an older version of the model parameters."""


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""
