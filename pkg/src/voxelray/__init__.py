"""voxelray: CT volume ray-casting toolkit.

Ingest DICOM slice stacks or raw arrays into scalar volumes, render them
with a block-decomposed ray caster, measure image quality, estimate local
surface-to-volume ratios on meshes, and serve renders over HTTP.
"""

from .blocks import Block, BlockGrid, block_stats, cull_empty, decompose, fit_bounding_box, traversal_order
from .dicom import SliceImage, assemble_volume, parse_ct_slice, write_ct_slice
from .mesh import (
    GridIndex,
    TriangleMesh,
    build_grid_index,
    load_mesh,
    load_off,
    load_stl,
    make_box,
    make_icosphere,
    make_mesh,
    save_off,
    save_stl,
)
from .morphology import SvrResult, svr_at_point, svr_field, svr_to_csv, svr_to_ply
from .phantoms import PHANTOM_NAMES, generate_phantom
from .quality import convergence_study, psnr, ssim
from .render import (
    Camera,
    ImageRGBA,
    RenderSettings,
    RenderStats,
    composite_step,
    generate_ray,
    render,
)
from .sampling import gradient, sample, sample_tricubic, sample_trilinear
from .transfer import (
    ClassifiedLUT,
    PreintegratedTable,
    TransferFunction,
    build_lut,
    build_preintegrated,
    get_preset,
    preclassify_volume,
    transfer_from_points,
    windowed_transfer,
)
from .store import VolumeManifest, VolumeStore, volume_id
from .volume import ScalarVolume, load_raw, load_raw_file, make_volume, save_raw

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockGrid",
    "Camera",
    "ClassifiedLUT",
    "GridIndex",
    "ImageRGBA",
    "PHANTOM_NAMES",
    "PreintegratedTable",
    "RenderSettings",
    "RenderStats",
    "ScalarVolume",
    "SliceImage",
    "SvrResult",
    "TransferFunction",
    "TriangleMesh",
    "VolumeManifest",
    "VolumeStore",
    "assemble_volume",
    "block_stats",
    "build_grid_index",
    "build_lut",
    "build_preintegrated",
    "composite_step",
    "convergence_study",
    "cull_empty",
    "decompose",
    "fit_bounding_box",
    "generate_phantom",
    "generate_ray",
    "get_preset",
    "gradient",
    "load_mesh",
    "load_off",
    "load_raw",
    "load_raw_file",
    "load_stl",
    "make_box",
    "make_icosphere",
    "make_mesh",
    "make_volume",
    "parse_ct_slice",
    "preclassify_volume",
    "psnr",
    "render",
    "sample",
    "sample_tricubic",
    "sample_trilinear",
    "save_off",
    "save_raw",
    "save_stl",
    "ssim",
    "svr_at_point",
    "svr_field",
    "svr_to_csv",
    "svr_to_ply",
    "transfer_from_points",
    "traversal_order",
    "volume_id",
    "windowed_transfer",
    "write_ct_slice",
]
