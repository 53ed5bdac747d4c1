"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1, data and
file-format problems exit 2, numerical failures (non-finite loss) exit 3.
"""


class PvdError(Exception):
    """Base class for all package-specific errors."""


class UsageError(PvdError):
    """Bad command-line usage or invalid argument combination."""


class DataError(PvdError):
    """Malformed input data: parse failures, bad shapes, non-finite values."""


class CheckpointError(DataError):
    """Corrupt checkpoint: bad magic, truncation, or checksum mismatch."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by a newer, unsupported format version."""


class NumericalError(PvdError):
    """Non-finite result where a finite one is required (e.g. training loss)."""
