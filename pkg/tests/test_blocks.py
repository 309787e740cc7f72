import numpy as np
import pytest

import oracles
from voxelray.blocks import (
    block_stats,
    cull_empty,
    decompose,
    fit_bounding_box,
    traversal_order,
    with_visibility,
)
from voxelray.errors import EmptyBlock, InvalidBlockSpec
from voxelray.phantoms import generate_phantom
from voxelray.transfer import build_lut, get_preset, transfer_from_points
from voxelray.volume import make_volume


def flat_volume(value, dims=(16, 16, 16)):
    nx, ny, nz = dims
    return make_volume(np.full((nz, ny, nx), value, dtype=np.int16), (1, 1, 1))


def opaque_tf():
    return transfer_from_points(
        [(-2000.0, 1, 1, 1, 1.0), (2000.0, 1, 1, 1, 1.0)]
    )


def clear_tf():
    return transfer_from_points(
        [(-2000.0, 0, 0, 0, 0.0), (2000.0, 0, 0, 0, 0.0)]
    )


def test_axis_counts_512_and_single_block():
    wide = make_volume(np.zeros((8, 8, 512), dtype=np.int16), (1, 1, 1))
    grid = decompose(wide, 64, 3)
    assert grid.shape == (9, 1, 1)  # ceil((512-64)/61)+1 per the covered axis
    cube = flat_volume(0, (64, 64, 64))
    assert decompose(cube, 64, 3).shape == (1, 1, 1)
    assert decompose(cube, 64, 3).count == 1


def test_coverage_and_overlap_exhaustive():
    wide = make_volume(np.zeros((8, 8, 512), dtype=np.int16), (1, 1, 1))
    grid = decompose(wide, 64, 3)
    ox = grid.origins[0]
    ex = grid.extents[0]
    covered = np.zeros(512, dtype=int)
    for o, e in zip(ox, ex):
        covered[o : o + e] += 1
    assert covered.min() >= 1  # full coverage
    for i in range(len(ox) - 1):
        shared = (ox[i] + ex[i]) - ox[i + 1]
        assert shared == grid.overlap  # interior faces share exactly o layers


def test_invalid_specs():
    cube = flat_volume(0)
    with pytest.raises(InvalidBlockSpec):
        decompose(cube, 64, 64)
    with pytest.raises(InvalidBlockSpec):
        decompose(cube, 4, 1)
    with pytest.raises(InvalidBlockSpec):
        decompose(cube, 64, 0)


def test_per_block_minmax_matches_brute_force(torso64):
    grid = decompose(torso64, 16, 3)
    vals = torso64.values
    ox, oy, oz = grid.origins
    ex, ey, ez = grid.extents
    for bi, bj, bk in grid.iter_indices():
        region = vals[
            oz[bk] : oz[bk] + ez[bk],
            oy[bj] : oy[bj] + ey[bj],
            ox[bi] : ox[bi] + ex[bi],
        ]
        assert grid.vmin[bk, bj, bi] == region.min()
        assert grid.vmax[bk, bj, bi] == region.max()


def test_cull_extremes():
    cube = flat_volume(100)
    grid = decompose(cube, 8, 1)
    assert cull_empty(grid, build_lut(clear_tf())).empty_count == grid.count
    assert cull_empty(grid, build_lut(opaque_tf())).empty_count == 0


def test_cull_matches_per_voxel_scan(torso128):
    grid = decompose(torso128, 64, 3)
    for name in ("bone", "soft-tissue"):
        lut = build_lut(get_preset(name))
        culled = cull_empty(grid, lut)
        brute = oracles.brute_force_empty(torso128, grid, lut)
        assert np.array_equal(culled.empty, brute)


def test_cull_is_conservative(torso64):
    grid = decompose(torso64, 16, 3)
    lut = build_lut(get_preset("bone"))
    culled = cull_empty(grid, lut)
    brute = oracles.brute_force_empty(torso64, grid, lut)
    # no visible voxel may sit in a block marked empty
    assert not np.any(culled.empty & ~brute)


def test_aabb_full_block_and_single_voxel():
    lut = build_lut(opaque_tf())
    cube = flat_volume(100, (16, 16, 16))
    grid = decompose(cube, 16, 3)
    fitted = fit_bounding_box(cube, grid.block(0, 0, 0), lut)
    assert fitted.tight_aabb == ((0, 0, 0), (15, 15, 15))

    vals = np.full((16, 16, 16), -1000, dtype=np.int16)
    vals[8, 8, 8] = 1000
    spot = make_volume(vals, (1, 1, 1))
    ramp = transfer_from_points(
        [(-1000.0, 0, 0, 0, 0.0), (500.0, 0, 0, 0, 0.0), (1000.0, 1, 1, 1, 1.0)]
    )
    fitted = fit_bounding_box(spot, decompose(spot, 16, 3).block(0, 0, 0), build_lut(ramp))
    assert fitted.tight_aabb == ((7, 7, 7), (9, 9, 9))


def test_aabb_contains_every_visible_voxel(torso64):
    lut = build_lut(get_preset("bone"))
    grid = with_visibility(decompose(torso64, 16, 3), lut)
    vals = torso64.values
    visible = lut.rgba[lut.bin_index(vals), 3] > 0
    ox, oy, oz = grid.origins
    ex, ey, ez = grid.extents
    for bi, bj, bk in grid.iter_indices():
        if grid.empty[bk, bj, bi]:
            continue
        region = visible[
            oz[bk] : oz[bk] + ez[bk],
            oy[bj] : oy[bj] + ey[bj],
            ox[bi] : ox[bi] + ex[bi],
        ]
        zz, yy, xx = np.nonzero(region)
        lo = grid.aabb_lo[bk, bj, bi]
        hi = grid.aabb_hi[bk, bj, bi]
        assert np.all(ox[bi] + xx >= lo[0]) and np.all(ox[bi] + xx <= hi[0])
        assert np.all(oy[bj] + yy >= lo[1]) and np.all(oy[bj] + yy <= hi[1])
        assert np.all(oz[bk] + zz >= lo[2]) and np.all(oz[bk] + zz <= hi[2])


def test_empty_block_raises():
    cube = flat_volume(0)
    grid = decompose(cube, 16, 3)
    with pytest.raises(EmptyBlock):
        fit_bounding_box(cube, grid.block(0, 0, 0), build_lut(clear_tf()))


def test_traversal_order_geometry():
    cube = flat_volume(100, (24, 24, 24))
    grid = decompose(cube, 10, 2)  # 3 blocks per axis
    assert grid.shape == (3, 3, 3)
    order = traversal_order(grid, (12.0, 12.0, 200.0))
    assert order[0] == (1, 1, 2)  # max-k face block nearest a +z camera

    empty_all = cull_empty(grid, build_lut(clear_tf()))
    assert traversal_order(empty_all, (0.0, 0.0, 0.0)) == []


def test_traversal_order_matches_distance_sort():
    # 26 voxels with stride 8 gives three full blocks, centres symmetric
    # about the volume midpoint, so mirroring reverses the order exactly
    cube = flat_volume(100, (26, 26, 26))
    grid = decompose(cube, 10, 2)
    cam = np.array([40.0, -13.0, 7.0])
    order = traversal_order(grid, cam)

    sx, sy, sz = cube.spacing
    ox, oy, oz = grid.origins
    ex, ey, ez = grid.extents
    brute = []
    for bi, bj, bk in grid.iter_indices():
        centre = np.array(
            [
                (ox[bi] + (ex[bi] - 1) / 2) * sx,
                (oy[bj] + (ey[bj] - 1) / 2) * sy,
                (oz[bk] + (ez[bk] - 1) / 2) * sz,
            ]
        )
        brute.append((float(np.linalg.norm(centre - cam)), (bi, bj, bk)))
    brute.sort()
    assert order == [idx for _d, idx in brute]

    # mirroring a distant camera through the volume centre reverses the order
    centre = np.array([12.5, 12.5, 12.5])
    u = np.array([0.6, -0.2, 0.77])
    far = centre + 1e5 * u / np.linalg.norm(u)
    assert traversal_order(grid, 2 * centre - far) == traversal_order(grid, far)[::-1]


def test_block_stats_shape(torso64):
    grid = cull_empty(decompose(torso64, 16, 3), build_lut(get_preset("bone")))
    stats = block_stats(grid)
    assert stats["count"] == grid.count
    assert stats["empty"] == grid.empty_count
    assert 0.0 <= stats["empty_fraction"] <= 1.0
