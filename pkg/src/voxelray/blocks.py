"""Block decomposition of volumes for empty-space leaping.

A volume splits into cubic blocks of edge ``block_size`` whose origins sit
on a stride of ``block_size - overlap``, so neighbouring blocks share
``overlap`` voxels and a sample never needs data outside the block that owns
it. The last block along an axis is clipped to the boundary; its extent is
always larger than the overlap.

Each block records its value range. Against a classified LUT a block is
empty when no scalar in [min, max] maps to nonzero opacity, checked with
prefix sums over the LUT's opacity bins, and a non-empty block can carry a
tight bounding box of its visible voxels dilated by one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyBlock, InvalidBlockSpec
from .transfer import ClassifiedLUT
from .volume import ScalarVolume

DEFAULT_BLOCK_SIZE = 64
DEFAULT_OVERLAP = 3


@dataclass(frozen=True)
class Block:
    """One block of a decomposition; coordinates are global voxel indices."""

    index: tuple[int, int, int]
    origin: tuple[int, int, int]
    extent: tuple[int, int, int]
    value_min: int
    value_max: int
    empty: bool | None = None
    tight_aabb: tuple[tuple[int, int, int], tuple[int, int, int]] | None = None


@dataclass(frozen=True)
class BlockGrid:
    """A full decomposition; immutable, updates return a new grid."""

    volume: ScalarVolume
    block_size: int
    overlap: int
    shape: tuple[int, int, int]
    origins: tuple[np.ndarray, np.ndarray, np.ndarray]
    extents: tuple[np.ndarray, np.ndarray, np.ndarray]
    vmin: np.ndarray
    vmax: np.ndarray
    empty: np.ndarray | None = None
    aabb_lo: np.ndarray | None = None
    aabb_hi: np.ndarray | None = None

    @property
    def stride(self) -> int:
        return self.block_size - self.overlap

    @property
    def count(self) -> int:
        nbx, nby, nbz = self.shape
        return nbx * nby * nbz

    @property
    def empty_count(self) -> int:
        if self.empty is None:
            return 0
        return int(np.count_nonzero(self.empty))

    def block(self, bi: int, bj: int, bk: int) -> Block:
        ox, oy, oz = self.origins
        ex, ey, ez = self.extents
        empty = None if self.empty is None else bool(self.empty[bk, bj, bi])
        aabb = None
        if self.aabb_lo is not None and empty is False:
            lo = tuple(int(v) for v in self.aabb_lo[bk, bj, bi])
            hi = tuple(int(v) for v in self.aabb_hi[bk, bj, bi])
            aabb = (lo, hi)
        return Block(
            index=(bi, bj, bk),
            origin=(int(ox[bi]), int(oy[bj]), int(oz[bk])),
            extent=(int(ex[bi]), int(ey[bj]), int(ez[bk])),
            value_min=int(self.vmin[bk, bj, bi]),
            value_max=int(self.vmax[bk, bj, bi]),
            empty=empty,
            tight_aabb=aabb,
        )

    def iter_indices(self):
        nbx, nby, nbz = self.shape
        for bk in range(nbz):
            for bj in range(nby):
                for bi in range(nbx):
                    yield bi, bj, bk


def _axis_layout(n: int, block_size: int, stride: int):
    if n <= block_size:
        count = 1
    else:
        count = int(np.ceil((n - block_size) / stride)) + 1
    origins = np.arange(count, dtype=np.int64) * stride
    extents = np.minimum(block_size, n - origins)
    return origins, extents


def decompose(
    volume: ScalarVolume,
    block_size: int = DEFAULT_BLOCK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> BlockGrid:
    """Split a volume into overlapping blocks with per-block value ranges.

    Raises InvalidBlockSpec unless block_size >= 8 and 1 <= overlap <
    block_size.
    """
    if block_size < 8:
        raise InvalidBlockSpec(f"block_size must be >= 8, got {block_size}")
    if not 1 <= overlap < block_size:
        raise InvalidBlockSpec(
            f"overlap must satisfy 1 <= overlap < block_size, got {overlap}"
        )
    stride = block_size - overlap
    nx, ny, nz = volume.dims
    ox, ex = _axis_layout(nx, block_size, stride)
    oy, ey = _axis_layout(ny, block_size, stride)
    oz, ez = _axis_layout(nz, block_size, stride)
    shape = (len(ox), len(oy), len(oz))

    vmin = np.empty((shape[2], shape[1], shape[0]), dtype=np.int64)
    vmax = np.empty_like(vmin)
    vals = volume.values
    for bk in range(shape[2]):
        for bj in range(shape[1]):
            for bi in range(shape[0]):
                region = vals[
                    oz[bk] : oz[bk] + ez[bk],
                    oy[bj] : oy[bj] + ey[bj],
                    ox[bi] : ox[bi] + ex[bi],
                ]
                vmin[bk, bj, bi] = region.min()
                vmax[bk, bj, bi] = region.max()

    for arr in (ox, oy, oz, ex, ey, ez, vmin, vmax):
        arr.flags.writeable = False
    return BlockGrid(
        volume=volume,
        block_size=block_size,
        overlap=overlap,
        shape=shape,
        origins=(ox, oy, oz),
        extents=(ex, ey, ez),
        vmin=vmin,
        vmax=vmax,
    )


def _interval_visible(lut: ClassifiedLUT, vmin, vmax):
    """Whether any scalar in [vmin, vmax] maps to nonzero opacity."""
    prefix = lut.opacity_prefix()
    lo = lut.bin_index(vmin)
    hi = lut.bin_index(vmax)
    return (prefix[hi + 1] - prefix[lo]) > 0


def cull_empty(grid: BlockGrid, lut: ClassifiedLUT) -> BlockGrid:
    """Mark blocks whose whole value interval maps to zero opacity."""
    empty = ~_interval_visible(lut, grid.vmin, grid.vmax)
    empty.flags.writeable = False
    return replace(grid, empty=empty)


def fit_bounding_box(volume: ScalarVolume, block: Block, lut: ClassifiedLUT) -> Block:
    """Attach the tight AABB of the block's visible voxels, dilated by one.

    Coordinates are global voxel indices, inclusive on both ends, clipped to
    the block. Raises EmptyBlock when no voxel has nonzero opacity.
    """
    x0, y0, z0 = block.origin
    ex, ey, ez = block.extent
    region = volume.values[z0 : z0 + ez, y0 : y0 + ey, x0 : x0 + ex]
    visible = lut.rgba[lut.bin_index(region), 3] > 0
    if not visible.any():
        raise EmptyBlock(f"block {block.index} has no visible voxels")
    zz, yy, xx = np.nonzero(visible)
    lo = (
        x0 + max(int(xx.min()) - 1, 0),
        y0 + max(int(yy.min()) - 1, 0),
        z0 + max(int(zz.min()) - 1, 0),
    )
    hi = (
        x0 + min(int(xx.max()) + 1, ex - 1),
        y0 + min(int(yy.max()) + 1, ey - 1),
        z0 + min(int(zz.max()) + 1, ez - 1),
    )
    return replace(block, empty=False, tight_aabb=(lo, hi))


def with_visibility(grid: BlockGrid, lut: ClassifiedLUT) -> BlockGrid:
    """Cull empty blocks and fit bounding boxes for the rest.

    This is the preparation step the renderer uses; empty blocks keep an
    inverted sentinel box so any containment test fails.
    """
    grid = cull_empty(grid, lut)
    nbx, nby, nbz = grid.shape
    lo = np.full((nbz, nby, nbx, 3), np.iinfo(np.int64).max // 2, dtype=np.int64)
    hi = np.full((nbz, nby, nbx, 3), -1, dtype=np.int64)
    for bi, bj, bk in grid.iter_indices():
        if grid.empty[bk, bj, bi]:
            continue
        fitted = fit_bounding_box(grid.volume, grid.block(bi, bj, bk), lut)
        lo[bk, bj, bi] = fitted.tight_aabb[0]
        hi[bk, bj, bi] = fitted.tight_aabb[1]
    lo.flags.writeable = False
    hi.flags.writeable = False
    return replace(grid, aabb_lo=lo, aabb_hi=hi)


def traversal_order(grid: BlockGrid, camera) -> list[tuple[int, int, int]]:
    """Non-empty blocks ordered front to back from the camera position.

    Distance is camera to block centre in millimetres; ties break
    lexicographically on (bi, bj, bk). ``camera`` may be a Camera or a
    position triple.
    """
    position = np.asarray(getattr(camera, "position", camera), dtype=np.float64)
    sx, sy, sz = grid.volume.spacing
    ox, oy, oz = grid.origins
    ex, ey, ez = grid.extents
    order = []
    for bi, bj, bk in grid.iter_indices():
        if grid.empty is not None and grid.empty[bk, bj, bi]:
            continue
        centre = np.array(
            [
                (ox[bi] + (ex[bi] - 1) / 2.0) * sx,
                (oy[bj] + (ey[bj] - 1) / 2.0) * sy,
                (oz[bk] + (ez[bk] - 1) / 2.0) * sz,
            ]
        )
        dist = float(np.linalg.norm(centre - position))
        order.append((dist, (bi, bj, bk)))
    order.sort(key=lambda item: (item[0], item[1]))
    return [idx for _dist, idx in order]


def block_stats(grid: BlockGrid) -> dict:
    """JSON-friendly summary of a decomposition."""
    stats = {
        "block_size": grid.block_size,
        "overlap": grid.overlap,
        "stride": grid.stride,
        "shape": list(grid.shape),
        "count": grid.count,
        "empty": grid.empty_count if grid.empty is not None else None,
        "empty_fraction": (
            grid.empty_count / grid.count if grid.empty is not None else None
        ),
        "value_min": int(grid.vmin.min()),
        "value_max": int(grid.vmax.max()),
    }
    return stats


def build_atlas(grid: BlockGrid) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate block sub-volumes into one flat int16 array.

    Returns (atlas, offsets) with offsets in voxels, flat block order
    (bk, bj, bi) with bi fastest.
    """
    ox, oy, oz = grid.origins
    ex, ey, ez = grid.extents
    vals = grid.volume.values
    parts = []
    offsets = np.empty(grid.count, dtype=np.int64)
    pos = 0
    flat = 0
    for bk in range(grid.shape[2]):
        for bj in range(grid.shape[1]):
            for bi in range(grid.shape[0]):
                region = vals[
                    oz[bk] : oz[bk] + ez[bk],
                    oy[bj] : oy[bj] + ey[bj],
                    ox[bi] : ox[bi] + ex[bi],
                ]
                parts.append(region.ravel())
                offsets[flat] = pos
                pos += region.size
                flat += 1
    return np.concatenate(parts), offsets


def build_rgba_atlas(grid: BlockGrid, rgba_volume: np.ndarray) -> np.ndarray:
    """Planar per-block RGBA atlas matching build_atlas offsets.

    For a block at voxel offset ``off`` the four channel planes start at
    ``off * 4`` and follow each other, each one block-volume long.
    """
    ox, oy, oz = grid.origins
    ex, ey, ez = grid.extents
    parts = []
    for bk in range(grid.shape[2]):
        for bj in range(grid.shape[1]):
            for bi in range(grid.shape[0]):
                region = rgba_volume[
                    oz[bk] : oz[bk] + ez[bk],
                    oy[bj] : oy[bj] + ey[bj],
                    ox[bi] : ox[bi] + ex[bi],
                    :,
                ]
                for ch in range(4):
                    parts.append(np.ascontiguousarray(region[..., ch]).ravel())
    return np.concatenate(parts)
