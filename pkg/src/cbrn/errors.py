"""Exception hierarchy shared by all cbrn modules."""

from __future__ import annotations


class CbrnError(Exception):
    pass


class PbmError(CbrnError, ValueError):
    """Malformed or unsupported portable bitmap; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NormalizationError(CbrnError, ValueError):
    pass


class ManifestError(CbrnError, ValueError):
    pass


class LearningError(CbrnError):
    pass


class ConvergenceError(LearningError):
    pass


class RecallError(CbrnError):
    pass


class ArchiveError(CbrnError, ValueError):
    pass


class BadMagicError(ArchiveError):
    pass


class UnsupportedVersionError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    def __init__(self, offset: int, needed: int):
        super().__init__(f"truncated at offset {offset} (needed {needed} more bytes)")
        self.offset = offset


class TrailingDataError(ArchiveError):
    pass


class ArchiveInvariantError(ArchiveError):
    pass
