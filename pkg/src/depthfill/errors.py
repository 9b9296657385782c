"""Exception types shared across the package."""

from __future__ import annotations


class DepthfillError(Exception):
    """Base class for all errors raised by this package."""


class ImageIOError(DepthfillError):
    """A file could not be decoded or encoded."""


class UnsupportedFormatError(ImageIOError):
    """The file is readable but not one of the supported formats."""


class CorruptFileError(ImageIOError):
    """The file claims a supported format but its contents are broken."""


class PipelineError(DepthfillError):
    """A pipeline stage failed.

    Carries the stage name so the CLI can report a single-line diagnostic
    and pick the right exit code (I/O stages vs. compute stages).
    """

    def __init__(self, stage: str, message: str, *, io: bool = False):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
        self.io = io
