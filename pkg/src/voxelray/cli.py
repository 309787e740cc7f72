"""Command-line front door.

Subcommands cover the whole pipeline: ingest (DICOM directory, raw file
or phantom) into a store, render from a store, image quality metrics,
step-size convergence studies, mesh SVR fields, block benchmarks, and
serving the HTTP API. Camera, settings and transfer functions are small
JSON documents with the same schema the service accepts, so any render
is reproducible from its inputs by either path.

Exit codes: 0 success, 1 expected domain error (JSON on stderr),
2 usage error.
"""

from __future__ import annotations

import functools
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .blocks import block_stats, cull_empty, decompose
from .dicom import assemble_volume, parse_ct_slice
from .errors import VoxelrayError
from .imageio import encode_ppm, load_image, save_png
from .mesh import load_mesh
from .morphology import svr_field, svr_to_csv, svr_to_ply
from .phantoms import PHANTOM_NAMES, generate_phantom
from .quality import convergence_study, psnr, ssim
from .render import camera_from_dict, settings_from_dict
from .service import create_app, prepare_render
from .store import VolumeStore
from .transfer import build_lut, resolve_transfer
from .volume import load_raw


def _fail(err: VoxelrayError) -> None:
    click.echo(json.dumps({"error": {"code": err.code, "message": str(err)}}), err=True)
    sys.exit(1)


def domain_errors(fn):
    """Map VoxelrayError to exit code 1 with a structured stderr line."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VoxelrayError as err:
            _fail(err)

    return wrapper


def _triple(text: str, cast):
    parts = [p for p in text.replace(",", " ").split() ]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise click.BadParameter(f"expected 1 or 3 comma-separated values, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError:
        raise click.BadParameter(f"could not parse {text!r}")


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text())


@click.group()
@click.option(
    "--threads",
    type=int,
    default=0,
    help="Worker thread cap for rendering, 0 = all available.",
)
def main(threads: int) -> None:
    """Volume rendering toolkit: ingest, render, measure, serve."""
    if threads > 0:
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


@main.command()
@click.option("--dicom-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--raw", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dims", default=None, help="nx,ny,nz (raw and phantom sources).")
@click.option("--spacing", default="1,1,1", help="sx,sy,sz in mm (raw source).")
@click.option(
    "--format",
    "sample_format",
    type=click.Choice(["u8", "i16", "u16"]),
    default="i16",
    help="Raw sample format.",
)
@click.option("--phantom", type=click.Choice(PHANTOM_NAMES), default=None)
@click.option("--out", "store_path", required=True, type=click.Path(), help="Store directory.")
@domain_errors
def ingest(dicom_dir, raw, dims, spacing, sample_format, phantom, store_path):
    """Load a volume into a store and print its manifest."""
    sources = [s for s in (dicom_dir, raw, phantom) if s is not None]
    if len(sources) != 1:
        raise click.UsageError("choose exactly one of --dicom-dir, --raw, --phantom")

    if dicom_dir is not None:
        paths = sorted(p for p in Path(dicom_dir).iterdir() if p.is_file())
        slices = [parse_ct_slice(p.read_bytes()) for p in paths]
        volume = assemble_volume(slices)
        source = "dicom"
    elif raw is not None:
        if dims is None:
            raise click.UsageError("--raw requires --dims")
        volume = load_raw(
            Path(raw).read_bytes(),
            _triple(dims, int),
            _triple(spacing, float),
            sample_format,
        )
        source = "raw"
    else:
        if dims is None:
            raise click.UsageError("--phantom requires --dims")
        volume = generate_phantom(phantom, _triple(dims, int))
        source = "phantom"

    manifest = VolumeStore(store_path).add(volume, source)
    click.echo(json.dumps(manifest.to_dict(), indent=2))


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--volume", "volume_id", required=True)
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True))
@click.option("--tf", default="grayscale", help="Preset name or transfer JSON path.")
@click.option("--settings", "settings_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stats", "stats_path", type=click.Path(), default=None)
@domain_errors
def render(store_path, volume_id, camera_path, tf, settings_path, out_path, stats_path):
    """Render a stored volume to PNG or PPM."""
    store = VolumeStore(store_path)
    volume = store.get(volume_id)
    payload = {
        "camera": _read_json(camera_path),
        "transfer": tf,
        "settings": _read_json(settings_path) if settings_path else {},
    }
    image = prepare_render(volume, payload)
    out = Path(out_path)
    if out.suffix.lower() == ".ppm":
        out.write_bytes(encode_ppm(image))
    else:
        save_png(image, out)
    if stats_path:
        Path(stats_path).write_text(json.dumps(image.stats.to_dict(), indent=2))
    click.echo(f"wrote {out}")


@main.command()
@click.argument("image_a", type=click.Path(exists=True))
@click.argument("image_b", type=click.Path(exists=True))
@domain_errors
def quality(image_a, image_b):
    """PSNR and SSIM between two image files."""
    a = load_image(image_a)
    b = load_image(image_b)
    click.echo(
        json.dumps({"psnr_db": psnr(a, b), "ssim": ssim(a, b)}, indent=2)
    )


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--volume", "volume_id", required=True)
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True))
@click.option("--tf", default="grayscale")
@click.option("--settings", "settings_path", type=click.Path(exists=True), default=None)
@click.option("--steps", default="2,1,0.5,0.25", help="Step factors relative to spacing.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@domain_errors
def convergence(store_path, volume_id, camera_path, tf, settings_path, steps, out_path):
    """Step-size convergence study against a fine-step reference."""
    store = VolumeStore(store_path)
    volume = store.get(volume_id)
    camera = camera_from_dict(_read_json(camera_path))
    settings = settings_from_dict(_read_json(settings_path) if settings_path else {})
    base = min(volume.spacing)
    step_mm = [float(s) * base for s in steps.split(",")]
    rows = convergence_study(volume, camera, resolve_transfer(tf), settings, step_mm)
    doc = json.dumps(rows, indent=2)
    if out_path:
        Path(out_path).write_text(doc)
    click.echo(doc)


@main.command()
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True))
@click.option("--radius", type=float, required=True)
@click.option("--points", "points_path", type=click.Path(exists=True), default=None,
              help="CSV of x,y,z probe centres; defaults to mesh vertices.")
@click.option("--area-samples", type=int, default=None)
@click.option("--volume-samples", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--ply", "ply_path", type=click.Path(), default=None,
              help="Also write a colored point cloud of the field.")
@domain_errors
def svr(mesh_path, radius, points_path, area_samples, volume_samples, seed, out_path, ply_path):
    """Surface-to-volume ratio field over probe points."""
    mesh = load_mesh(mesh_path)
    if points_path:
        pts = np.loadtxt(points_path, delimiter=",", ndmin=2)[:, :3]
    else:
        pts = mesh.vertices
    kwargs = {}
    if area_samples:
        kwargs["n_area"] = area_samples
    if volume_samples:
        kwargs["n_volume"] = volume_samples
    results = svr_field(mesh, pts, radius, base_seed=seed, **kwargs)
    svr_to_csv(results, out_path)
    if ply_path:
        svr_to_ply(results, ply_path)
    defined = sum(1 for r in results if r.svr is not None)
    click.echo(f"wrote {out_path} ({len(results)} points, {defined} defined)")


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--volume", "volume_id", required=True)
@click.option("--tf", default="bone", help="Preset or transfer JSON used for culling.")
@click.option("--block-size", type=int, default=64)
@click.option("--overlap", type=int, default=3)
@click.option("--size", type=int, default=256, help="Benchmark image width and height.")
@domain_errors
def bench(store_path, volume_id, tf, block_size, overlap, size):
    """Decomposition statistics and render timings for a stored volume."""
    store = VolumeStore(store_path)
    volume = store.get(volume_id)
    grid = cull_empty(
        decompose(volume, block_size, overlap), build_lut(resolve_transfer(tf))
    )
    stats = block_stats(grid)

    cx, cy, cz = (0.5 * e for e in volume.extent_mm)
    payload = {
        "camera": {
            "position": [cx + 3.0 * max(volume.extent_mm), cy, cz],
            "look_at": [cx, cy, cz],
            "width": size,
            "height": size,
        },
        "transfer": tf,
    }
    timings = {}
    for label, use_blocks in (("monolithic", False), ("blocks", True)):
        payload["settings"] = {
            "use_blocks": use_blocks, "block_size": block_size, "overlap": overlap,
        }
        t0 = time.perf_counter()
        prepare_render(volume, payload)
        timings[f"{label}_s"] = round(time.perf_counter() - t0, 4)

    click.echo(json.dumps({"blocks": stats, "render": timings}, indent=2))


@main.command()
@click.option("--data-dir", required=True, type=click.Path(), envvar="VOXELRAY_DATA_DIR")
@click.option("--host", default="127.0.0.1", envvar="VOXELRAY_HOST")
@click.option("--port", type=int, default=8000, envvar="VOXELRAY_PORT")
@click.option("--cache-size", type=int, default=4, envvar="VOXELRAY_CACHE_SIZE")
@click.option("--upload-cap", type=int, default=2 * 1024**3, envvar="VOXELRAY_UPLOAD_CAP")
@click.option("--queue-bound", type=int, default=8, envvar="VOXELRAY_QUEUE_BOUND")
def serve(data_dir, host, port, cache_size, upload_cap, queue_bound):
    """Run the HTTP render service."""
    import uvicorn

    app = create_app(
        data_dir,
        cache_size=cache_size,
        upload_cap=upload_cap,
        queue_bound=queue_bound,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
