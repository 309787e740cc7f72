"""Ray-casting renderer.

A pinhole camera shoots one ray through each pixel centre; rays march the
volume front to back at a fixed step, sampling at interval midpoints,
classifying, optionally shading with a headlight, and compositing
premultiplied colour until the opacity threshold stops the ray.

The same compiled kernel renders both layouts: a whole volume is a
decomposition with a single block. With a real decomposition the kernel
leaps over empty blocks and over samples outside per-block visibility
boxes; margins on those boxes keep the skip lossless for samples whose
interpolation support cannot touch a visible voxel.

Opacity from the transfer function is defined per reference step
(half the smallest spacing); the marcher corrects it for the actual step
with the usual exponent rule before compositing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .blocks import (
    DEFAULT_BLOCK_SIZE,
    DEFAULT_OVERLAP,
    BlockGrid,
    build_atlas,
    build_rgba_atlas,
    decompose,
    with_visibility,
)
from .errors import InvalidSettings, IsovalueOutOfRange
from .sampling import INTERPOLATIONS
from .transfer import (
    TransferFunction,
    build_lut,
    build_preintegrated,
    preclassify_volume,
)
from .volume import ScalarVolume

CLASSIFICATIONS = ("post", "pre", "preintegrated")
MODES = ("dvr", "isosurface")

# extra voxels around a visibility box so skipped samples cannot have
# interpolation taps on a visible voxel: reach is 1.5 voxels for trilinear
# with gradients, 2.5 for tricubic
SKIP_MARGIN = {"trilinear": 2.0, "tricubic": 3.0}


@dataclass(frozen=True)
class Camera:
    """Pinhole camera. position/look_at/up in millimetres, fov in degrees."""

    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    vertical_fov_deg: float = 30.0
    width: int = 256
    height: int = 256

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        if not 0.0 < self.vertical_fov_deg < 180.0:
            raise ValueError(f"vertical_fov_deg must be in (0, 180), got {self.vertical_fov_deg}")
        fwd = np.subtract(self.look_at, self.position, dtype=np.float64)
        if np.linalg.norm(fwd) == 0:
            raise ValueError("camera position and look_at coincide")
        if np.linalg.norm(np.cross(fwd, np.asarray(self.up, dtype=np.float64))) == 0:
            raise ValueError("camera up vector is parallel to the view direction")

    def basis(self):
        """Orthonormal (forward, right, true_up)."""
        fwd = np.subtract(self.look_at, self.position, dtype=np.float64)
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        right /= np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return fwd, right, true_up

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "up": list(self.up),
            "vertical_fov_deg": self.vertical_fov_deg,
            "width": self.width,
            "height": self.height,
        }


def camera_from_dict(data: dict) -> Camera:
    return Camera(
        position=tuple(data["position"]),
        look_at=tuple(data["look_at"]),
        up=tuple(data.get("up", (0.0, 0.0, 1.0))),
        vertical_fov_deg=float(data.get("vertical_fov_deg", 30.0)),
        width=int(data.get("width", 256)),
        height=int(data.get("height", 256)),
    )


def generate_ray(camera: Camera, pixel: tuple[int, int]):
    """Ray through the centre of pixel (px, py); py runs down the image.

    Returns (origin, unit direction) as float64 arrays in millimetres.
    """
    px, py = pixel
    fwd, right, true_up = camera.basis()
    half_h = math.tan(math.radians(camera.vertical_fov_deg) / 2.0)
    half_w = half_h * camera.width / camera.height
    u = (2.0 * (px + 0.5) / camera.width - 1.0) * half_w
    v = (1.0 - 2.0 * (py + 0.5) / camera.height) * half_h
    direction = fwd + u * right + v * true_up
    direction /= np.linalg.norm(direction)
    return np.asarray(camera.position, dtype=np.float64), direction


def _ray_grid(camera: Camera):
    """Origins and directions for every pixel, row-major, shape (w*h, 3)."""
    fwd, right, true_up = camera.basis()
    half_h = math.tan(math.radians(camera.vertical_fov_deg) / 2.0)
    half_w = half_h * camera.width / camera.height
    px = np.arange(camera.width, dtype=np.float64)
    py = np.arange(camera.height, dtype=np.float64)
    u = (2.0 * (px + 0.5) / camera.width - 1.0) * half_w
    v = (1.0 - 2.0 * (py + 0.5) / camera.height) * half_h
    dirs = (
        fwd[None, None, :]
        + u[None, :, None] * right[None, None, :]
        + v[:, None, None] * true_up[None, None, :]
    )
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    dirs = dirs.reshape(-1, 3)
    origins = np.broadcast_to(
        np.asarray(camera.position, dtype=np.float64), dirs.shape
    ).copy()
    return np.ascontiguousarray(origins), np.ascontiguousarray(dirs)


def _clip_to_bounds(origins, dirs, extent_mm):
    """Slab intersection with [0, extent] per axis; miss when tmax < tmin."""
    tiny = 1e-300
    d = np.where(np.abs(dirs) < tiny, np.where(dirs < 0, -tiny, tiny), dirs)
    lo = (0.0 - origins) / d
    hi = (np.asarray(extent_mm)[None, :] - origins) / d
    tmin = np.minimum(lo, hi).max(axis=1)
    tmax = np.maximum(lo, hi).min(axis=1)
    tmin = np.maximum(tmin, 0.0)
    return tmin, tmax


@dataclass(frozen=True)
class RenderSettings:
    """Everything about a render except the camera and transfer function.

    step is the sampling interval in millimetres; None means half the
    smallest volume spacing, which is also the opacity reference step.
    """

    step: float | None = None
    interpolation: str = "trilinear"
    classification: str = "post"
    mode: str = "dvr"
    isovalue: float | None = None
    lighting: bool = True
    early_termination_alpha: float = 0.99
    use_blocks: bool = False
    block_size: int = DEFAULT_BLOCK_SIZE
    overlap: int = DEFAULT_OVERLAP
    background: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)
    ambient: float = 0.1
    diffuse: float = 0.7
    specular: float = 0.2
    shininess: float = 32.0

    def validate(self) -> None:
        if self.step is not None and not self.step > 0:
            raise InvalidSettings(f"step must be positive, got {self.step}")
        if self.interpolation not in INTERPOLATIONS:
            raise InvalidSettings(
                f"interpolation must be one of {INTERPOLATIONS}, got {self.interpolation!r}"
            )
        if self.classification not in CLASSIFICATIONS:
            raise InvalidSettings(
                f"classification must be one of {CLASSIFICATIONS}, got {self.classification!r}"
            )
        if self.mode not in MODES:
            raise InvalidSettings(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "isosurface" and self.isovalue is None:
            raise InvalidSettings("isovalue is required when mode is 'isosurface'")
        if not 0.0 < self.early_termination_alpha <= 1.0:
            raise InvalidSettings(
                "early_termination_alpha must be in (0, 1], got "
                f"{self.early_termination_alpha}"
            )
        if len(self.background) != 4 or any(
            not 0.0 <= c <= 1.0 for c in self.background
        ):
            raise InvalidSettings(
                f"background must be four channels in [0, 1], got {self.background}"
            )

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "interpolation": self.interpolation,
            "classification": self.classification,
            "mode": self.mode,
            "isovalue": self.isovalue,
            "lighting": self.lighting,
            "early_termination_alpha": self.early_termination_alpha,
            "use_blocks": self.use_blocks,
            "block_size": self.block_size,
            "overlap": self.overlap,
            "background": list(self.background),
        }


def settings_from_dict(data: dict) -> RenderSettings:
    known = {f for f in RenderSettings.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise InvalidSettings(f"unknown settings fields: {sorted(unknown)}")
    kwargs = dict(data)
    if "background" in kwargs and kwargs["background"] is not None:
        kwargs["background"] = tuple(kwargs["background"])
    return RenderSettings(**kwargs)


@dataclass(frozen=True)
class RenderStats:
    rays: int
    samples_taken: int
    samples_skipped: int
    blocks_total: int
    blocks_empty: int
    blocks_visited: int
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "rays": self.rays,
            "samples_taken": self.samples_taken,
            "samples_skipped": self.samples_skipped,
            "blocks_total": self.blocks_total,
            "blocks_empty": self.blocks_empty,
            "blocks_visited": self.blocks_visited,
            "wall_time_s": self.wall_time_s,
        }


@dataclass(frozen=True)
class ImageRGBA:
    """Rendered image; pixels are straight (non-premultiplied) 8-bit RGBA."""

    pixels: np.ndarray
    stats: RenderStats | None = None
    #: isosurface hit distance in mm per pixel, NaN where no hit (iso mode only)
    depth: np.ndarray | None = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def composite_step(dst, src, step: float, ref_step: float):
    """One front-to-back compositing step.

    dst is premultiplied (r, g, b, a) accumulated so far; src is a straight
    colour with opacity per ref_step. Returns the new premultiplied dst.
    """
    r, g, b, a = dst
    sr, sg, sb, sa = src
    a_hat = 1.0 - (1.0 - sa) ** (step / ref_step)
    w = (1.0 - a) * a_hat
    return (r + w * sr, g + w * sg, b + w * sb, a + w)


def shade_headlight(rgb, grad, view_dir, ka=0.1, kd=0.7, ks=0.2, shininess=32.0):
    """Phong with the light riding on the camera.

    The normal is -grad/|grad|; a zero gradient returns the base colour
    unchanged. With light == view the reflection term r.v reduces to
    2(n.l)^2 - 1.
    """
    g = np.asarray(grad, dtype=np.float64)
    norm = np.linalg.norm(g)
    if norm < 1e-12:
        return tuple(float(c) for c in rgb)
    n = -g / norm
    light = -np.asarray(view_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    ndl = float(n @ light)
    diff = kd * max(ndl, 0.0)
    spec = ks * max(2.0 * ndl * ndl - 1.0, 0.0) ** shininess
    return tuple(
        min(1.0, max(0.0, c * (ka + diff) + spec)) for c in rgb
    )


def _reference_step(spacing) -> float:
    return 0.5 * min(spacing)


def _ro(arr: np.ndarray) -> np.ndarray:
    """Contiguous read-only view/copy; keeps kernel signatures uniform so
    numba compiles the march once regardless of where inputs came from."""
    a = np.ascontiguousarray(arr)
    if a.flags.writeable:
        if a.base is not None:
            a = a.copy()
        a.flags.writeable = False
    return a


def render(
    target: ScalarVolume | BlockGrid,
    camera: Camera,
    tf: TransferFunction,
    settings: RenderSettings = RenderSettings(),
) -> ImageRGBA:
    """Render a volume or a prepared block grid to an RGBA image.

    Passing a BlockGrid (or setting use_blocks) enables empty-space
    leaping; the image matches the monolithic render within quantisation
    tolerance. Isosurface mode requires settings.isovalue inside the
    volume's value range.
    """
    settings.validate()
    t_start = time.perf_counter()

    if isinstance(target, BlockGrid):
        grid = target
        volume = grid.volume
        use_blocks = True
    else:
        volume = target
        grid = None
        use_blocks = settings.use_blocks
        if use_blocks:
            grid = decompose(volume, settings.block_size, settings.overlap)

    vr_lo, vr_hi = volume.value_range
    if settings.mode == "isosurface":
        if not vr_lo <= settings.isovalue <= vr_hi:
            raise IsovalueOutOfRange(
                f"isovalue {settings.isovalue} outside value range [{vr_lo}, {vr_hi}]"
            )

    sx, sy, sz = volume.spacing
    ref_step = _reference_step(volume.spacing)
    step = settings.step if settings.step is not None else ref_step
    cubic = settings.interpolation == "tricubic"
    lut = build_lut(tf)

    mode = _kernels.MODE_ISO if settings.mode == "isosurface" else _kernels.MODE_DVR
    classify = {
        "post": _kernels.CLS_POST,
        "pre": _kernels.CLS_PRE,
        "preintegrated": _kernels.CLS_PREINT,
    }[settings.classification]
    if mode == _kernels.MODE_ISO:
        classify = _kernels.CLS_POST

    nx, ny, nz = volume.dims
    blocks_empty = 0
    if use_blocks:
        grid = with_visibility(grid, lut)
        blocks_empty = grid.empty_count
        atlas, offsets = build_atlas(grid)
        org_x, org_y, org_z = (a.astype(np.int64) for a in grid.origins)
        ext_x, ext_y, ext_z = (a.astype(np.int64) for a in grid.extents)
        stride = grid.stride
        vmin = grid.vmin.ravel().astype(np.float64)
        vmax = grid.vmax.ravel().astype(np.float64)
        empty = grid.empty.ravel().astype(np.uint8)
        margin = SKIP_MARGIN[settings.interpolation]
        box_lo = grid.aabb_lo.reshape(-1, 3).astype(np.float64) - margin
        box_hi = grid.aabb_hi.reshape(-1, 3).astype(np.float64) + margin
        skip_empty = True
    else:
        atlas = volume.values.ravel()
        offsets = np.zeros(1, dtype=np.int64)
        org_x = org_y = org_z = np.zeros(1, dtype=np.int64)
        ext_x = np.array([nx], dtype=np.int64)
        ext_y = np.array([ny], dtype=np.int64)
        ext_z = np.array([nz], dtype=np.int64)
        stride = max(nx, ny, nz)
        vmin = np.array([float(vr_lo)])
        vmax = np.array([float(vr_hi)])
        empty = np.zeros(1, dtype=np.uint8)
        box_lo = np.full((1, 3), -1e30)
        box_hi = np.full((1, 3), 1e30)
        skip_empty = False

    if classify == _kernels.CLS_PRE:
        rgba_volume = preclassify_volume(volume, lut)
        if use_blocks:
            rgba_atlas = build_rgba_atlas(grid, rgba_volume)
        else:
            parts = [np.ascontiguousarray(rgba_volume[..., ch]).ravel() for ch in range(4)]
            rgba_atlas = np.concatenate(parts)
    else:
        rgba_atlas = np.zeros(4, dtype=np.uint8)

    if classify == _kernels.CLS_PREINT:
        table = build_preintegrated(lut, step, ref_step).rgba
    else:
        table = np.zeros((1, 1, 4))

    lut_lo, lut_hi = lut.domain
    lut_inv_w = lut.bins / (lut_hi - lut_lo)
    tbl_lo = lut_lo
    tbl_inv_w = table.shape[0] / (lut_hi - lut_lo)

    origins, dirs = _ray_grid(camera)
    tmins, tmaxs = _clip_to_bounds(origins, dirs, volume.extent_mm)

    npix = origins.shape[0]
    out = np.empty((npix, 4))
    depth = np.full(npix, np.nan)
    taken = np.zeros(npix, dtype=np.int64)
    skipped = np.zeros(npix, dtype=np.int64)
    blocks_hit = np.zeros(offsets.shape[0], dtype=np.uint8)

    bg = settings.background
    _kernels.march(
        _ro(origins), _ro(dirs), _ro(tmins), _ro(tmaxs),
        sx, sy, sz, float(step), float(ref_step),
        mode, cubic, settings.lighting, classify, skip_empty,
        _ro(atlas), _ro(rgba_atlas), _ro(offsets),
        _ro(org_x), _ro(org_y), _ro(org_z), _ro(ext_x), _ro(ext_y), _ro(ext_z),
        int(stride), _ro(vmin), _ro(vmax), _ro(empty), _ro(box_lo), _ro(box_hi),
        _ro(lut.rgba), float(lut_lo), float(lut_inv_w),
        _ro(table), float(tbl_lo), float(tbl_inv_w),
        float(settings.isovalue if settings.isovalue is not None else 0.0),
        float(settings.early_termination_alpha),
        settings.ambient, settings.diffuse, settings.specular, settings.shininess,
        bg[0], bg[1], bg[2], bg[3],
        out, depth, taken, skipped, blocks_hit,
    )

    premult = out.reshape(camera.height, camera.width, 4)
    alpha = premult[..., 3:4]
    straight = np.where(alpha > 0, premult[..., :3] / np.maximum(alpha, 1e-12), 0.0)
    pixels = np.empty((camera.height, camera.width, 4), dtype=np.uint8)
    pixels[..., :3] = np.rint(np.clip(straight, 0.0, 1.0) * 255.0)
    pixels[..., 3] = np.rint(np.clip(premult[..., 3], 0.0, 1.0) * 255.0)

    stats = RenderStats(
        rays=npix,
        samples_taken=int(taken.sum()),
        samples_skipped=int(skipped.sum()),
        blocks_total=grid.count if grid is not None else 1,
        blocks_empty=blocks_empty,
        blocks_visited=int(blocks_hit.sum()),
        wall_time_s=time.perf_counter() - t_start,
    )
    depth_map = depth.reshape(camera.height, camera.width) if mode == _kernels.MODE_ISO else None
    return ImageRGBA(pixels=pixels, stats=stats, depth=depth_map)
