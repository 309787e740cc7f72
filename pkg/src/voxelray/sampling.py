"""Continuous sampling of scalar volumes.

Points are continuous voxel coordinates: integer coordinates land exactly on
lattice sites, and coordinates outside the lattice clamp to its edge.
Trilinear interpolation reads the 8 surrounding sites; tricubic uses the
separable Catmull-Rom kernel over 4x4x4 sites with clamped taps.

Gradients are central differences of the chosen interpolant at half-voxel
offsets, divided by the physical spacing, so they are per millimetre.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .volume import ScalarVolume

INTERPOLATIONS = ("trilinear", "tricubic")


def _is_cubic(interpolation: str) -> bool:
    if interpolation not in INTERPOLATIONS:
        raise ValueError(
            f"unknown interpolation {interpolation!r}, expected one of {INTERPOLATIONS}"
        )
    return interpolation == "tricubic"


def _as_points(points) -> tuple[np.ndarray, bool]:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        if pts.shape != (3,):
            raise ValueError(f"a point must have 3 components, got shape {pts.shape}")
        return pts.reshape(1, 3), True
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
    return np.ascontiguousarray(pts), False


def sample(volume: ScalarVolume, points, interpolation: str = "trilinear"):
    """Interpolated scalar value at one point (3,) or many points (n, 3)."""
    cubic = _is_cubic(interpolation)
    pts, single = _as_points(points)
    nx, ny, nz = volume.dims
    out = _kernels.sample_points(volume.values.ravel(), nx, ny, nz, pts, cubic)
    return float(out[0]) if single else out


def sample_trilinear(volume: ScalarVolume, points):
    return sample(volume, points, "trilinear")


def sample_tricubic(volume: ScalarVolume, points):
    return sample(volume, points, "tricubic")


def gradient(volume: ScalarVolume, points, interpolation: str = "trilinear"):
    """Scalar gradient per millimetre at one point (3,) or many (n, 3)."""
    cubic = _is_cubic(interpolation)
    pts, single = _as_points(points)
    nx, ny, nz = volume.dims
    sx, sy, sz = volume.spacing
    out = _kernels.gradient_points(
        volume.values.ravel(), nx, ny, nz, pts, cubic, sx, sy, sz
    )
    return out[0] if single else out
