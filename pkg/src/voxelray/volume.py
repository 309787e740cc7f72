"""Scalar volume container and raw file round-trip.

A volume is a dense axis-aligned lattice of signed 16-bit samples with
anisotropic spacing in millimetres. Arrays are kept in C order with x the
fastest axis, i.e. ``values[z, y, x]``, matching the slice-stack layout
produced by the ingest path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SizeMismatch

SAMPLE_FORMAT = "i16"
ENDIANNESS = "little"


@dataclass(frozen=True)
class ScalarVolume:
    """Dense scalar field on a regular grid.

    Parameters
    ----------
    values : np.ndarray
        int16 array of shape (nz, ny, nx), C order.
    spacing : tuple of float
        Sample pitch (sx, sy, sz) in millimetres, all positive.
    value_range : tuple of int
        (min, max) over all samples.
    clamp_count : int
        Number of samples clamped during calibration, 0 for synthetic data.
    """

    values: np.ndarray
    spacing: tuple[float, float, float]
    value_range: tuple[int, int]
    clamp_count: int = 0

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise ValueError(f"values must be 3-d, got ndim={v.ndim}")
        if v.dtype != np.int16:
            raise ValueError(f"values must be int16, got {v.dtype}")
        if any(n < 2 for n in v.shape):
            raise ValueError(f"every dimension must be >= 2, got shape {v.shape}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        v.flags.writeable = False

    @property
    def dims(self) -> tuple[int, int, int]:
        """Grid size as (nx, ny, nz)."""
        nz, ny, nx = self.values.shape
        return nx, ny, nz

    @property
    def extent_mm(self) -> tuple[float, float, float]:
        """Physical size of the sample lattice along each axis."""
        nx, ny, nz = self.dims
        sx, sy, sz = self.spacing
        return (nx - 1) * sx, (ny - 1) * sy, (nz - 1) * sz

    def voxel_bytes(self) -> bytes:
        """Samples as little-endian int16 bytes, x fastest."""
        return self.values.astype("<i2", copy=False).tobytes()


def make_volume(values: np.ndarray, spacing, clamp_count: int = 0) -> ScalarVolume:
    """Build a ScalarVolume from an int16 array, computing its value range."""
    values = np.ascontiguousarray(values, dtype=np.int16)
    vmin = int(values.min())
    vmax = int(values.max())
    return ScalarVolume(values, tuple(float(s) for s in spacing), (vmin, vmax), clamp_count)


_SAMPLE_DTYPES = {"u8": "u1", "i16": "<i2", "u16": "<u2"}


def load_raw(data: bytes, dims, spacing, sample_format: str = SAMPLE_FORMAT) -> ScalarVolume:
    """Interpret headerless little-endian sample bytes as a volume.

    dims is (nx, ny, nz) with x the fastest-varying axis in the byte stream.
    sample_format is one of u8, i16, u16; u8 and u16 are widened to the
    internal signed 16-bit representation, with u16 values above 32767
    clamped and counted in the result's clamp_count.
    Raises SizeMismatch when the payload length disagrees with dims.
    """
    if sample_format not in _SAMPLE_DTYPES:
        raise ValueError(f"unknown sample_format {sample_format!r}")
    dtype = np.dtype(_SAMPLE_DTYPES[sample_format])
    nx, ny, nz = (int(d) for d in dims)
    expected = nx * ny * nz * dtype.itemsize
    if len(data) != expected:
        raise SizeMismatch(
            f"raw payload is {len(data)} bytes, dims {nx}x{ny}x{nz} "
            f"{sample_format} require {expected}"
        )
    arr = np.frombuffer(data, dtype=dtype).reshape(nz, ny, nx)
    clamped = 0
    if sample_format == "u16":
        clamped = int(np.count_nonzero(arr > 32767))
        arr = np.minimum(arr, 32767)
    return make_volume(arr.astype(np.int16), spacing, clamp_count=clamped)


def save_raw(volume: ScalarVolume, path) -> None:
    """Write <path> with sample bytes and a <path>.json sidecar."""
    path = Path(path)
    path.write_bytes(volume.voxel_bytes())
    sidecar = {
        "dims": list(volume.dims),
        "spacing": list(volume.spacing),
        "sample_format": SAMPLE_FORMAT,
        "endianness": ENDIANNESS,
        "value_range": list(volume.value_range),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def load_raw_file(path) -> ScalarVolume:
    """Read a raw volume written by save_raw, using its sidecar for geometry."""
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return load_raw(
        path.read_bytes(),
        sidecar["dims"],
        sidecar["spacing"],
        sidecar.get("sample_format", SAMPLE_FORMAT),
    )
