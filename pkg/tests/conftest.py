"""Shared fixtures: phantoms, DICOM fixture slices, stores and clients."""

from __future__ import annotations

import numpy as np
import pytest

from voxelray.dicom import write_ct_slice
from voxelray.phantoms import generate_phantom
from voxelray.render import Camera
from voxelray.store import VolumeStore


@pytest.fixture(scope="session")
def torso128():
    return generate_phantom("torso", (128, 128, 128))


@pytest.fixture(scope="session")
def torso64():
    return generate_phantom("torso", (64, 64, 64))


@pytest.fixture(scope="session")
def sphere48():
    return generate_phantom("sphere", (48, 48, 48))


@pytest.fixture(scope="session")
def shell48():
    return generate_phantom("shell", (48, 48, 48))


def centered_camera(volume, size: int = 96, distance_factor: float = 2.2) -> Camera:
    """Camera on the +x side looking at the volume centre."""
    cx, cy, cz = (0.5 * e for e in volume.extent_mm)
    d = distance_factor * max(volume.extent_mm)
    return Camera(
        position=(cx + d, cy, cz),
        look_at=(cx, cy, cz),
        width=size,
        height=size,
    )


@pytest.fixture
def make_slices():
    """Factory for synthetic DICOM slice byte streams."""

    def build(
        count: int = 3,
        rows: int = 4,
        cols: int = 4,
        spacing=(1.0, 1.0),
        z0: float = 0.0,
        dz: float = 1.0,
        slope: float = 1.0,
        intercept: float = 0.0,
        use_slice_location: bool = False,
    ):
        out = []
        for k in range(count):
            pixels = (np.arange(rows * cols, dtype=np.int16) + 10 * k).reshape(rows, cols)
            out.append(
                write_ct_slice(
                    pixels,
                    pixel_spacing=spacing,
                    position=z0 + k * dz,
                    slope=slope,
                    intercept=intercept,
                    use_slice_location=use_slice_location,
                )
            )
        return out

    return build


@pytest.fixture
def store(tmp_path):
    return VolumeStore(tmp_path / "store")
