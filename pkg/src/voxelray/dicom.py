"""Minimal DICOM CT slice reader and writer.

Supports exactly the subset needed for CT stacks: explicit-VR little-endian
transfer syntax (1.2.840.10008.1.2.1), uncompressed 16-bit monochrome pixel
data, one slice per file. The writer produces streams the parser accepts and
is used for fixtures and round-trip tests.

Layout reminder: a part-10 file is a 128-byte preamble, the magic 'DICM',
file-meta elements in group 0002, then dataset elements ordered by tag.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DicomParseError,
    DuplicatePosition,
    InconsistentGeometry,
    MissingMagic,
    MissingRequiredTag,
    NonUniformSpacing,
    PixelDataLengthMismatch,
    UnsupportedTransferSyntax,
)
from .volume import ScalarVolume, make_volume

EXPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2.1"
CT_IMAGE_STORAGE = "1.2.840.10008.5.1.4.1.1.2"
UID_ROOT = "1.2.826.0.1.3680043.10.424"

TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_SOP_CLASS = (0x0008, 0x0016)
TAG_SOP_INSTANCE = (0x0008, 0x0018)
TAG_IMAGE_POSITION = (0x0020, 0x0032)
TAG_SLICE_LOCATION = (0x0020, 0x1041)
TAG_SAMPLES_PER_PIXEL = (0x0028, 0x0002)
TAG_PHOTOMETRIC = (0x0028, 0x0004)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLUMNS = (0x0028, 0x0011)
TAG_PIXEL_SPACING = (0x0028, 0x0030)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_BITS_STORED = (0x0028, 0x0101)
TAG_HIGH_BIT = (0x0028, 0x0102)
TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

_TAG_NAMES = {
    TAG_TRANSFER_SYNTAX: "TransferSyntaxUID",
    TAG_ROWS: "Rows",
    TAG_COLUMNS: "Columns",
    TAG_PIXEL_SPACING: "PixelSpacing",
    TAG_IMAGE_POSITION: "ImagePositionPatient",
    TAG_PIXEL_DATA: "PixelData",
}

_LONG_VRS = {b"OB", b"OD", b"OF", b"OL", b"OW", b"SQ", b"UC", b"UN", b"UR", b"UT"}
_KNOWN_VRS = _LONG_VRS | {
    b"AE", b"AS", b"AT", b"CS", b"DA", b"DS", b"DT", b"FL", b"FD", b"IS",
    b"LO", b"LT", b"PN", b"SH", b"SL", b"SS", b"ST", b"TM", b"UI", b"UL", b"US",
}

_SEQ_DELIMITER = b"\xfe\xff\xdd\xe0\x00\x00\x00\x00"


@dataclass(frozen=True)
class SliceImage:
    """One parsed CT slice.

    pixel_spacing keeps the header order (row_mm, col_mm). position is the
    z component of ImagePositionPatient, or SliceLocation as a fallback.
    samples is the raw (rows, cols) array before rescale calibration.
    """

    rows: int
    cols: int
    pixel_spacing: tuple[float, float]
    position: float
    rescale_slope: float
    rescale_intercept: float
    pixel_representation: int
    samples: np.ndarray
    sop_instance_uid: str = ""


def _parse_ds(raw: bytes, what: str) -> list[float]:
    try:
        return [float(part) for part in raw.decode("ascii").strip("\x00 ").split("\\")]
    except (UnicodeDecodeError, ValueError) as exc:
        raise DicomParseError(f"malformed decimal string in {what}: {raw!r}") from exc


def _parse_us(raw: bytes, what: str) -> int:
    if len(raw) < 2:
        raise DicomParseError(f"truncated US value in {what}")
    return struct.unpack_from("<H", raw)[0]


class _Reader:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def peek_group(self) -> int:
        return struct.unpack_from("<H", self.data, self.pos)[0]

    def next_element(self):
        """Return (tag, vr, value_bytes), advancing past the element."""
        d, p = self.data, self.pos
        if p + 8 > len(d):
            raise DicomParseError("truncated element header")
        group, elem = struct.unpack_from("<HH", d, p)
        vr = d[p + 4 : p + 6]
        if vr not in _KNOWN_VRS:
            raise UnsupportedTransferSyntax(
                f"element ({group:04X},{elem:04X}) has no explicit VR; "
                "only explicit-VR little-endian streams are supported"
            )
        if vr in _LONG_VRS:
            if p + 12 > len(d):
                raise DicomParseError("truncated element header")
            (length,) = struct.unpack_from("<I", d, p + 8)
            body = p + 12
        else:
            (length,) = struct.unpack_from("<H", d, p + 6)
            body = p + 8
        if length == 0xFFFFFFFF:
            if (group, elem) == TAG_PIXEL_DATA:
                raise UnsupportedTransferSyntax(
                    "encapsulated (compressed) PixelData is not supported"
                )
            if vr != b"SQ":
                raise DicomParseError(
                    f"undefined length on non-sequence element ({group:04X},{elem:04X})"
                )
            end = d.find(_SEQ_DELIMITER, body)
            if end < 0:
                raise DicomParseError("unterminated sequence")
            self.pos = end + len(_SEQ_DELIMITER)
            return (group, elem), vr, b""
        if body + length > len(d):
            raise DicomParseError(
                f"element ({group:04X},{elem:04X}) overruns the stream"
            )
        self.pos = body + length
        return (group, elem), vr, d[body : body + length]


def parse_ct_slice(data: bytes) -> SliceImage:
    """Parse one CT slice from part-10 bytes.

    Raises MissingMagic, UnsupportedTransferSyntax, MissingRequiredTag, or
    PixelDataLengthMismatch as appropriate.
    """
    if len(data) < 132 or data[128:132] != b"DICM":
        raise MissingMagic("no DICM marker at offset 128")

    reader = _Reader(data, 132)
    transfer_syntax = None
    while not reader.eof() and reader.peek_group() == 0x0002:
        tag, _vr, value = reader.next_element()
        if tag == TAG_TRANSFER_SYNTAX:
            transfer_syntax = value.decode("ascii").strip("\x00 ")
    if transfer_syntax is None:
        raise MissingRequiredTag(TAG_TRANSFER_SYNTAX, "TransferSyntaxUID")
    if transfer_syntax != EXPLICIT_VR_LITTLE_ENDIAN:
        raise UnsupportedTransferSyntax(
            f"transfer syntax {transfer_syntax} is not supported; "
            f"expected {EXPLICIT_VR_LITTLE_ENDIAN}"
        )

    elements: dict[tuple[int, int], bytes] = {}
    pixel_data = None
    while not reader.eof():
        tag, _vr, value = reader.next_element()
        if tag == TAG_PIXEL_DATA:
            pixel_data = value
            break
        elements[tag] = value

    def require(tag):
        if tag not in elements:
            raise MissingRequiredTag(tag, _TAG_NAMES.get(tag, "?"))
        return elements[tag]

    rows = _parse_us(require(TAG_ROWS), "Rows")
    cols = _parse_us(require(TAG_COLUMNS), "Columns")
    spacing = _parse_ds(require(TAG_PIXEL_SPACING), "PixelSpacing")
    if len(spacing) != 2 or any(s <= 0 for s in spacing):
        raise DicomParseError(f"PixelSpacing must be two positive values, got {spacing}")

    if TAG_BITS_ALLOCATED in elements:
        bits = _parse_us(elements[TAG_BITS_ALLOCATED], "BitsAllocated")
        if bits != 16:
            raise UnsupportedTransferSyntax(f"BitsAllocated={bits}, only 16 is supported")

    if TAG_IMAGE_POSITION in elements:
        ipp = _parse_ds(elements[TAG_IMAGE_POSITION], "ImagePositionPatient")
        if len(ipp) != 3:
            raise DicomParseError(f"ImagePositionPatient needs 3 components, got {ipp}")
        position = ipp[2]
    elif TAG_SLICE_LOCATION in elements:
        position = _parse_ds(elements[TAG_SLICE_LOCATION], "SliceLocation")[0]
    else:
        raise MissingRequiredTag(TAG_IMAGE_POSITION, "ImagePositionPatient")

    slope = 1.0
    intercept = 0.0
    if TAG_RESCALE_SLOPE in elements:
        slope = _parse_ds(elements[TAG_RESCALE_SLOPE], "RescaleSlope")[0]
    if TAG_RESCALE_INTERCEPT in elements:
        intercept = _parse_ds(elements[TAG_RESCALE_INTERCEPT], "RescaleIntercept")[0]
    pixel_rep = 0
    if TAG_PIXEL_REPRESENTATION in elements:
        pixel_rep = _parse_us(elements[TAG_PIXEL_REPRESENTATION], "PixelRepresentation")

    if pixel_data is None:
        raise MissingRequiredTag(TAG_PIXEL_DATA, "PixelData")
    expected = rows * cols * 2
    if len(pixel_data) != expected:
        raise PixelDataLengthMismatch(
            f"PixelData is {len(pixel_data)} bytes, {rows}x{cols} 16-bit needs {expected}"
        )
    dtype = "<i2" if pixel_rep == 1 else "<u2"
    samples = np.frombuffer(pixel_data, dtype=dtype).reshape(rows, cols).copy()

    uid = ""
    if TAG_SOP_INSTANCE in elements:
        uid = elements[TAG_SOP_INSTANCE].decode("ascii").strip("\x00 ")

    return SliceImage(
        rows=rows,
        cols=cols,
        pixel_spacing=(spacing[0], spacing[1]),
        position=position,
        rescale_slope=slope,
        rescale_intercept=intercept,
        pixel_representation=pixel_rep,
        samples=samples,
        sop_instance_uid=uid,
    )


def assemble_volume(slices: Sequence[SliceImage]) -> ScalarVolume:
    """Stack parsed slices into a calibrated int16 volume.

    Slices may arrive in any order; they are sorted by position. Raises
    InconsistentGeometry, DuplicatePosition, or NonUniformSpacing when the
    stack is not a regular grid. Calibrated values are clamped to the int16
    range and the clamp count is recorded on the volume.
    """
    if len(slices) < 2:
        raise InconsistentGeometry(f"need at least 2 slices, got {len(slices)}")
    first = slices[0]
    for s in slices[1:]:
        if (s.rows, s.cols) != (first.rows, first.cols):
            raise InconsistentGeometry(
                f"slice size {s.rows}x{s.cols} differs from {first.rows}x{first.cols}"
            )
        if s.pixel_spacing != first.pixel_spacing:
            raise InconsistentGeometry(
                f"pixel spacing {s.pixel_spacing} differs from {first.pixel_spacing}"
            )

    ordered = sorted(slices, key=lambda s: s.position)
    positions = np.array([s.position for s in ordered])
    gaps = np.diff(positions)
    if np.any(gaps == 0):
        at = positions[np.argmin(gaps)]
        raise DuplicatePosition(f"two slices share position {at}")
    median = float(np.median(gaps))
    if np.any(np.abs(gaps - median) > 0.10 * median):
        raise NonUniformSpacing(
            f"slice gaps {gaps.tolist()} deviate more than 10% from median {median}"
        )

    stack = np.empty((len(ordered), first.rows, first.cols), dtype=np.int16)
    clamp_count = 0
    for i, s in enumerate(ordered):
        calibrated = s.rescale_slope * s.samples.astype(np.float64) + s.rescale_intercept
        clamp_count += int(np.count_nonzero((calibrated < -32768) | (calibrated > 32767)))
        stack[i] = np.rint(np.clip(calibrated, -32768, 32767)).astype(np.int16)

    row_mm, col_mm = first.pixel_spacing
    return make_volume(stack, (col_mm, row_mm, median), clamp_count=clamp_count)


def _encode_element(group: int, elem: int, vr: bytes, value: bytes) -> bytes:
    if len(value) % 2:
        value += b"\x00" if vr in (b"UI", b"OB") else b" "
    head = struct.pack("<HH", group, elem) + vr
    if vr in _LONG_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def _ds(*values) -> bytes:
    return "\\".join(format(v, "g") for v in values).encode("ascii")


def write_ct_slice(
    pixels: np.ndarray,
    *,
    pixel_spacing: tuple[float, float],
    position: float,
    slope: float = 1.0,
    intercept: float = 0.0,
    signed: bool = True,
    use_slice_location: bool = False,
    sop_instance_uid: str | None = None,
) -> bytes:
    """Encode one CT slice as explicit-VR little-endian part-10 bytes.

    pixels is a (rows, cols) integer array stored as int16 or uint16 per
    ``signed``. pixel_spacing is (row_mm, col_mm). With use_slice_location
    the position goes into SliceLocation instead of ImagePositionPatient.
    """
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"pixels must be 2-d, got shape {pixels.shape}")
    rows, cols = pixels.shape
    dtype = "<i2" if signed else "<u2"
    body = np.ascontiguousarray(pixels, dtype=dtype).tobytes()
    if sop_instance_uid is None:
        seed = zlib.crc32(body + struct.pack("<d", position))
        sop_instance_uid = f"{UID_ROOT}.{seed}"

    meta = _encode_element(0x0002, 0x0002, b"UI", CT_IMAGE_STORAGE.encode())
    meta += _encode_element(0x0002, 0x0003, b"UI", sop_instance_uid.encode())
    meta += _encode_element(0x0002, 0x0010, b"UI", EXPLICIT_VR_LITTLE_ENDIAN.encode())
    header = _encode_element(0x0002, 0x0000, b"UL", struct.pack("<I", len(meta)))

    ds: list[bytes] = [
        _encode_element(*TAG_SOP_CLASS, b"UI", CT_IMAGE_STORAGE.encode()),
        _encode_element(*TAG_SOP_INSTANCE, b"UI", sop_instance_uid.encode()),
        _encode_element(*TAG_SAMPLES_PER_PIXEL, b"US", struct.pack("<H", 1)),
        _encode_element(*TAG_PHOTOMETRIC, b"CS", b"MONOCHROME2"),
        _encode_element(*TAG_ROWS, b"US", struct.pack("<H", rows)),
        _encode_element(*TAG_COLUMNS, b"US", struct.pack("<H", cols)),
        _encode_element(*TAG_PIXEL_SPACING, b"DS", _ds(*pixel_spacing)),
        _encode_element(*TAG_BITS_ALLOCATED, b"US", struct.pack("<H", 16)),
        _encode_element(*TAG_BITS_STORED, b"US", struct.pack("<H", 16)),
        _encode_element(*TAG_HIGH_BIT, b"US", struct.pack("<H", 15)),
        _encode_element(
            *TAG_PIXEL_REPRESENTATION, b"US", struct.pack("<H", 1 if signed else 0)
        ),
        _encode_element(*TAG_RESCALE_INTERCEPT, b"DS", _ds(intercept)),
        _encode_element(*TAG_RESCALE_SLOPE, b"DS", _ds(slope)),
    ]
    if use_slice_location:
        ds.append(_encode_element(*TAG_SLICE_LOCATION, b"DS", _ds(position)))
    else:
        ds.append(_encode_element(*TAG_IMAGE_POSITION, b"DS", _ds(0.0, 0.0, position)))
    ds.append(_encode_element(*TAG_PIXEL_DATA, b"OW", body))

    dataset = b"".join(sorted(ds[:-1], key=lambda e: struct.unpack_from("<HH", e))) + ds[-1]
    return b"\x00" * 128 + b"DICM" + header + meta + dataset
