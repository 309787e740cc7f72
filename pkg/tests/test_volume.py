import numpy as np
import pytest

from voxelray.errors import SizeMismatch
from voxelray.volume import (
    ScalarVolume,
    load_raw,
    load_raw_file,
    make_volume,
    save_raw,
)


def cube(n=2, dtype=np.int16):
    return np.arange(n**3, dtype=dtype).reshape(n, n, n)


def test_make_volume_computes_range():
    v = make_volume(cube(), (1.0, 1.0, 1.0))
    assert v.value_range == (0, 7)
    assert v.dims == (2, 2, 2)


def test_values_are_immutable():
    v = make_volume(cube(), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        v.values[0, 0, 0] = 5


def test_rejects_bad_shape_and_spacing():
    with pytest.raises(ValueError):
        ScalarVolume(np.zeros((2, 2), dtype=np.int16), (1, 1, 1), (0, 0))
    with pytest.raises(ValueError):
        make_volume(np.zeros((1, 2, 2), dtype=np.int16), (1, 1, 1))
    with pytest.raises(ValueError):
        make_volume(cube(), (1.0, 0.0, 1.0))


def test_extent_is_gap_count_times_spacing():
    v = make_volume(np.zeros((3, 4, 5), dtype=np.int16), (2.0, 1.0, 0.5))
    assert v.dims == (5, 4, 3)
    assert v.extent_mm == (8.0, 3.0, 1.0)


def test_load_raw_u8_direct_copy():
    v = load_raw(bytes(range(8)), (2, 2, 2), (1, 1, 1), "u8")
    assert v.value_range == (0, 7)
    assert v.clamp_count == 0


def test_load_raw_size_mismatch():
    with pytest.raises(SizeMismatch):
        load_raw(bytes(9), (2, 2, 2), (1, 1, 1), "u8")
    with pytest.raises(SizeMismatch):
        load_raw(bytes(8), (2, 2, 2), (1, 1, 1), "i16")


def test_load_raw_u16_clamps_and_counts():
    samples = np.array([0, 40000, 32767, 65535, 1, 2, 3, 4], dtype="<u2")
    v = load_raw(samples.tobytes(), (2, 2, 2), (1, 1, 1), "u16")
    assert v.value_range == (0, 32767)
    assert v.clamp_count == 2


def test_i16_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.integers(-2000, 3000, size=(4, 5, 6), dtype=np.int16)
    v = make_volume(vals, (0.7, 0.8, 0.9))
    path = tmp_path / "vol.raw"
    save_raw(v, path)
    back = load_raw_file(path)
    assert back.voxel_bytes() == v.voxel_bytes()
    assert back.spacing == v.spacing
    assert back.value_range == v.value_range


def test_voxel_bytes_x_fastest():
    v = make_volume(cube(), (1, 1, 1))
    first_four = np.frombuffer(v.voxel_bytes()[:8], dtype="<i2")
    # walking the bytes varies x first: (0,0,0),(1,0,0),(0,1,0),(1,1,0)
    assert list(first_four) == [0, 1, 2, 3]
