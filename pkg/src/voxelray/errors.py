"""Exception taxonomy shared across the package.

Each domain error exposes a stable ``code`` (its class name) so that the CLI
and the HTTP service can map failures to machine-readable identifiers without
parsing messages.
"""


class VoxelrayError(Exception):
    """Base class for all expected domain errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


# ingest: DICOM stream parsing


class DicomParseError(VoxelrayError):
    """Base class for malformed or unsupported DICOM input."""


class MissingMagic(DicomParseError):
    """The stream has no 128-byte preamble followed by 'DICM'."""


class UnsupportedTransferSyntax(DicomParseError):
    """The stream is not uncompressed explicit-VR little-endian 16-bit."""


class MissingRequiredTag(DicomParseError):
    """A required data element is absent from the stream."""

    def __init__(self, tag: tuple[int, int], name: str):
        self.tag = tag
        self.name = name
        super().__init__(f"missing required tag ({tag[0]:04X},{tag[1]:04X}) {name}")


class PixelDataLengthMismatch(DicomParseError):
    """PixelData length disagrees with Rows*Columns*2 bytes."""


# ingest: slice assembly


class InconsistentGeometry(VoxelrayError):
    """Slices disagree on rows, columns, or pixel spacing."""


class NonUniformSpacing(VoxelrayError):
    """Slice positions are not uniformly spaced within tolerance."""


class DuplicatePosition(VoxelrayError):
    """Two slices share the same position along the scan axis."""


class SizeMismatch(VoxelrayError):
    """Raw payload size disagrees with the declared dimensions."""


# block decomposition


class InvalidBlockSpec(VoxelrayError):
    """Block size or overlap is out of the supported range."""


class EmptyBlock(VoxelrayError):
    """Operation requires a non-empty block."""


# rendering


class InvalidSettings(VoxelrayError):
    """A render settings field is out of range; the message names it."""


class IsovalueOutOfRange(VoxelrayError):
    """Isosurface value lies outside the volume's value range."""


# quality metrics


class DimensionMismatch(VoxelrayError):
    """Images passed to a metric do not share the same dimensions."""


# volume store / service


class UnknownVolume(VoxelrayError):
    """No stored volume exists under the requested id."""
