"""Synthetic CT-like test volumes.

Three deterministic phantoms used by tests, benchmarks, and the demo service:

``sphere``
    Radial ramp from 1000 at the centre voxel down to -1000, clipped. Gives
    an analytic isosurface radius and gradient direction.
``shell``
    Hollow ball, single bright shell over an air background.
``torso``
    Air background, an off-centre tissue ellipsoid, and three bone bodies
    (a spine rod plus two blobs). Sized so that a 64-block decomposition of
    the 128-cube leaves a clear majority of pure-air blocks.

Values follow CT convention: air -1000, soft tissue about 40, dense bone 1200.
Boundaries ramp over one or two voxels so interpolated renders stay smooth.
"""

from __future__ import annotations

import numpy as np

from .volume import ScalarVolume, make_volume

AIR = -1000
TISSUE = 40
BONE = 1200
SPHERE_PEAK = 1000
SHELL_VALUE = 800

PHANTOM_NAMES = ("sphere", "shell", "torso")


def _voxel_grid(dims):
    nx, ny, nz = dims
    z, y, x = np.meshgrid(
        np.arange(nz, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nx, dtype=np.float64),
        indexing="ij",
    )
    return x, y, z


def _ellipsoid_blend(x, y, z, center, semi, width):
    """Soft indicator of an ellipsoid, 1 inside, 0 outside.

    The transition spans roughly ``width`` voxels measured along the
    shortest semi-axis, centred on the nominal surface.
    """
    cx, cy, cz = center
    ax, ay, az = semi
    e = np.sqrt(((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 2)
    s_min = min(ax, ay, az)
    return np.clip((1.0 - e) * s_min / width + 0.5, 0.0, 1.0)


def _sphere(dims):
    x, y, z = _voxel_grid(dims)
    c = [d // 2 for d in dims]
    r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    radius = min(dims) // 2
    return np.clip(SPHERE_PEAK - 2 * SPHERE_PEAK * r / radius, AIR, SPHERE_PEAK)


def _shell(dims):
    x, y, z = _voxel_grid(dims)
    c = [(d - 1) / 2.0 for d in dims]
    r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    radius = min(dims) / 2.0
    d = np.maximum(0.55 * radius - r, r - 0.80 * radius)
    band = np.clip(0.5 - d / 1.5, 0.0, 1.0)
    return AIR + (SHELL_VALUE - AIR) * band


def _torso(dims):
    nx, ny, nz = dims
    x, y, z = _voxel_grid(dims)

    def c(fx, fy, fz):
        return fx * nx, fy * ny, fz * nz

    def s(fx, fy, fz):
        return fx * nx, fy * ny, fz * nz

    body = _ellipsoid_blend(x, y, z, c(0.50, 0.63, 0.63), s(0.46, 0.29, 0.29), 2.0)
    spine = _ellipsoid_blend(x, y, z, c(0.50, 0.63, 0.71), s(0.40, 0.065, 0.065), 1.5)
    blob_l = _ellipsoid_blend(x, y, z, c(0.34, 0.60, 0.55), s(0.17, 0.10, 0.08), 1.5)
    blob_r = _ellipsoid_blend(x, y, z, c(0.68, 0.66, 0.56), s(0.12, 0.11, 0.09), 1.5)
    bone = np.maximum(spine, np.maximum(blob_l, blob_r))

    return AIR + (TISSUE - AIR) * body + (BONE - TISSUE) * bone


_BUILDERS = {"sphere": _sphere, "shell": _shell, "torso": _torso}


def generate_phantom(name: str, dims=(128, 128, 128), spacing=(1.0, 1.0, 1.0)) -> ScalarVolume:
    """Build one of the named phantoms at the given grid size.

    dims is (nx, ny, nz); every axis must be at least 8 so the shapes have
    room for their boundary ramps.
    """
    if name not in _BUILDERS:
        raise ValueError(f"unknown phantom {name!r}, expected one of {PHANTOM_NAMES}")
    dims = tuple(int(d) for d in dims)
    if any(d < 8 for d in dims):
        raise ValueError(f"phantom dims must be >= 8 per axis, got {dims}")
    field = _BUILDERS[name](dims)
    values = np.rint(field).astype(np.int16)
    return make_volume(values, spacing)
