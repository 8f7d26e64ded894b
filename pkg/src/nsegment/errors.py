"""Exception taxonomy shared by every module in the package."""

from __future__ import annotations


class NsegmentError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParam(NsegmentError, ValueError):
    """A parameter is outside its documented domain."""


class DimensionMismatch(NsegmentError, ValueError):
    """Two rasters that must share dimensions do not."""


class EmptySegment(NsegmentError):
    """An operation that needs at least one set pixel got an empty mask."""


class UnsupportedFormat(NsegmentError):
    """A label file is not an 8-bit single-channel or paletted raster."""


class CorruptFile(NsegmentError):
    """A file exists but cannot be decoded."""


class NoPairsFound(NsegmentError):
    """Dataset scan produced no usable image/label pairs."""


class NoData(NsegmentError):
    """A metric was requested but no pixel contributed to it."""
