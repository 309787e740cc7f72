import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from voxelray.sampling import gradient, sample, sample_tricubic, sample_trilinear
from voxelray.volume import make_volume


def field_volume(f, n=16, spacing=(1.0, 1.0, 1.0)):
    z, y, x = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    return make_volume(np.asarray(f(x, y, z), dtype=np.int16), spacing)


@pytest.fixture(scope="module")
def linear_vol():
    return field_volume(oracles.linear_field((3, -7, 11, 40)))


@pytest.fixture(scope="module")
def cubic_vol():
    return field_volume(oracles.cubic_1d_field(8.0))


def interior_points(n_points=200, lo=2.0, hi=13.0, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(n_points, 3))


@pytest.mark.parametrize("interp", ["trilinear", "tricubic"])
def test_linear_field_reproduced(linear_vol, interp):
    f = oracles.linear_field((3, -7, 11, 40))
    pts = interior_points()
    got = sample(linear_vol, pts, interp)
    want = f(pts[:, 0], pts[:, 1], pts[:, 2])
    assert np.max(np.abs(got - want)) < 1e-4


def test_cubic_1d_field_relative_error(cubic_vol):
    f = oracles.cubic_1d_field(8.0)
    pts = interior_points()
    got = sample_tricubic(cubic_vol, pts)
    want = f(pts[:, 0], pts[:, 1], pts[:, 2])
    rel = np.abs(got - want) / np.abs(want)
    assert np.max(rel) < 1e-3


@pytest.mark.parametrize("interp", ["trilinear", "tricubic"])
def test_lattice_point_identity_exact(linear_vol, cubic_vol, interp):
    for vol in (linear_vol, cubic_vol):
        idx = np.stack(
            np.meshgrid(np.arange(16), np.arange(16), np.arange(16), indexing="ij"),
            axis=-1,
        ).reshape(-1, 3)[:, ::-1]  # (x, y, z) order
        got = sample(vol, idx.astype(np.float64), interp)
        want = vol.values[idx[:, 2], idx[:, 1], idx[:, 0]].astype(np.float64)
        assert np.array_equal(got, want)


def test_single_point_returns_scalar(linear_vol):
    v = sample_trilinear(linear_vol, (2.5, 3.5, 4.5))
    assert isinstance(v, float)


def test_out_of_bounds_clamps(linear_vol):
    f = oracles.linear_field((3, -7, 11, 40))
    inside = sample_trilinear(linear_vol, (0.0, 5.0, 5.0))
    outside = sample_trilinear(linear_vol, (-4.0, 5.0, 5.0))
    assert outside == inside == f(0, 5, 5)


@pytest.mark.parametrize("interp", ["trilinear", "tricubic"])
def test_gradient_of_linear_field(interp):
    spacing = (0.5, 1.0, 2.0)
    vol = field_volume(oracles.linear_field((3, -7, 11, 40)), spacing=spacing)
    pts = interior_points(50)
    g = gradient(vol, pts, interp)
    want = np.array([3 / spacing[0], -7 / spacing[1], 11 / spacing[2]])
    assert np.max(np.abs(g - want)) < 1e-4


def test_unknown_interpolation_rejected(linear_vol):
    with pytest.raises(ValueError):
        sample(linear_vol, (1.0, 1.0, 1.0), "quadratic")


@settings(max_examples=30, deadline=None)
@given(
    st.tuples(
        st.integers(0, 15), st.integers(0, 15), st.integers(0, 15)
    )
)
def test_lattice_identity_random_sites(point):
    vol = field_volume(oracles.cubic_1d_field(8.0))
    x, y, z = point
    want = float(vol.values[z, y, x])
    assert sample_trilinear(vol, (float(x), float(y), float(z))) == want
    assert sample_tricubic(vol, (float(x), float(y), float(z))) == want
