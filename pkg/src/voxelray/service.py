"""Stateless HTTP render service.

Thin-client delivery of the renderer: clients upload volumes once, then
request renders, slices and metadata over JSON/PNG. Every render response
is a pure function of the stored volume bytes and the request body, so
any number of service instances over the same data directory are
interchangeable and restarts are invisible to clients.

Endpoints
---------
GET  /healthz                               liveness probe, plain "ok"
GET  /volumes                               list of volume manifests
POST /volumes                               multipart upload (DICOM zip, or raw + manifest)
GET  /volumes/{id}                          manifest plus block statistics
POST /volumes/{id}/render                   PNG body, stats in X-Render-Stats
GET  /volumes/{id}/slices/{axis}/{index}    grayscale PNG with window/level

Domain errors map to JSON ``{"error": {"code", "message"}}`` with 400 for
ingest problems, 404 for unknown ids, 422 for invalid request settings,
413 over the upload cap and 503 when the render queue is full.
"""

from __future__ import annotations

import io
import json
import threading
import zipfile

import numpy as np
from fastapi import Body, FastAPI, File, Form, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .blocks import block_stats, cull_empty, decompose
from .dicom import assemble_volume, parse_ct_slice
from .errors import (
    InvalidSettings,
    IsovalueOutOfRange,
    UnknownVolume,
    VoxelrayError,
)
from .imageio import encode_png, encode_png_gray
from .render import camera_from_dict, render, settings_from_dict
from .store import VolumeStore
from .transfer import PRESET_NAMES, build_lut, get_preset, resolve_transfer
from .volume import ScalarVolume, load_raw

DEFAULT_UPLOAD_CAP = 2 * 1024**3
DEFAULT_QUEUE_BOUND = 8
STATS_HEADER = "X-Render-Stats"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        {"error": {"code": code, "message": message}}, status_code=status
    )


def _status_for(exc: VoxelrayError) -> int:
    if isinstance(exc, UnknownVolume):
        return 404
    if isinstance(exc, (InvalidSettings, IsovalueOutOfRange)):
        return 422
    return 400


def prepare_render(volume: ScalarVolume, payload: dict):
    """Parse a request body and render; returns the ImageRGBA.

    The CLI funnels through this same function, which is what makes CLI
    and service outputs byte-identical for identical inputs.
    """
    if not isinstance(payload, dict) or "camera" not in payload:
        raise InvalidSettings("request body must contain a 'camera' object")
    try:
        camera = camera_from_dict(payload["camera"])
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSettings(f"camera: {e}") from None
    try:
        tf = resolve_transfer(payload.get("transfer", "grayscale"))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSettings(f"transfer: {e}") from None
    try:
        settings = settings_from_dict(payload.get("settings") or {})
    except (TypeError, ValueError) as e:
        raise InvalidSettings(f"settings: {e}") from None
    return render(volume, camera, tf, settings)


def render_request(volume: ScalarVolume, payload: dict) -> tuple[bytes, dict]:
    """Render per a request body; returns (png bytes, stats dict)."""
    image = prepare_render(volume, payload)
    return encode_png(image), image.stats.to_dict()


def _slice_plane(volume: ScalarVolume, axis: str, index: int) -> np.ndarray:
    nx, ny, nz = volume.dims
    sizes = {"x": nx, "y": ny, "z": nz}
    if axis not in sizes:
        raise InvalidSettings(f"axis must be one of x, y, z, got {axis!r}")
    if not 0 <= index < sizes[axis]:
        raise InvalidSettings(
            f"index {index} out of range for axis {axis} of size {sizes[axis]}"
        )
    if axis == "z":
        return volume.values[index]
    if axis == "y":
        return volume.values[:, index, :]
    return volume.values[:, :, index]


def window_level_map(plane: np.ndarray, window: float, level: float) -> np.ndarray:
    """Linear value -> [0, 255] mapping, clamped; uint8 output."""
    if window <= 0:
        raise InvalidSettings(f"window must be positive, got {window}")
    lo = level - window / 2.0
    gray = (plane.astype(np.float64) - lo) / window * 255.0
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def create_app(
    data_dir,
    cache_size: int = 4,
    upload_cap: int = DEFAULT_UPLOAD_CAP,
    queue_bound: int = DEFAULT_QUEUE_BOUND,
) -> FastAPI:
    """Application factory; all state lives in the store's data directory."""
    store = VolumeStore(data_dir, cache_size=cache_size)
    render_slots = threading.BoundedSemaphore(max(int(queue_bound), 1))

    app = FastAPI(title="voxelray render service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=[STATS_HEADER],
    )

    @app.exception_handler(VoxelrayError)
    async def _domain_error(request: Request, exc: VoxelrayError):
        return _error(_status_for(exc), exc.code, str(exc))

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.get("/presets")
    def presets() -> dict:
        return {name: get_preset(name).to_dict() for name in PRESET_NAMES}

    @app.get("/volumes")
    def list_volumes() -> list:
        return [m.to_dict() for m in store.list()]

    @app.get("/volumes/{vid}")
    def volume_detail(vid: str) -> dict:
        manifest = store.manifest(vid)
        grid = decompose(store.get(vid))
        stats = block_stats(grid)
        stats["empty_by_preset"] = {
            name: cull_empty(grid, build_lut(get_preset(name))).empty_count
            for name in PRESET_NAMES
        }
        out = manifest.to_dict()
        out["blocks"] = stats
        return out

    @app.post("/volumes", status_code=201)
    async def upload_volume(
        file: UploadFile = File(...),
        manifest: str | None = Form(None),
    ):
        chunks: list[bytes] = []
        total = 0
        while True:
            chunk = await file.read(1 << 20)
            if not chunk:
                break
            total += len(chunk)
            if total > upload_cap:
                return _error(413, "PayloadTooLarge", f"upload exceeds {upload_cap} bytes")
            chunks.append(chunk)
        data = b"".join(chunks)

        if manifest is not None:
            try:
                meta = json.loads(manifest)
                dims = meta["dims"]
                spacing = meta["spacing"]
                fmt = meta.get("sample_format", "i16")
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                return _error(400, "InvalidManifest", f"raw manifest: {e}")
            volume = load_raw(data, dims, spacing, fmt)
            stored = store.add(volume, "raw")
        else:
            try:
                archive = zipfile.ZipFile(io.BytesIO(data))
            except zipfile.BadZipFile:
                return _error(400, "InvalidUpload", "expected a zip of DICOM slices")
            slices = [
                parse_ct_slice(archive.read(name))
                for name in sorted(archive.namelist())
                if not name.endswith("/")
            ]
            volume = assemble_volume(slices)
            stored = store.add(volume, "dicom")
        return JSONResponse(
            {"id": stored.id, "manifest": stored.to_dict()}, status_code=201
        )

    @app.post("/volumes/{vid}/render")
    def render_volume(vid: str, payload: dict = Body(...)) -> Response:
        if not render_slots.acquire(blocking=False):
            return _error(503, "RenderQueueFull", "render queue is at capacity")
        try:
            volume = store.get(vid)
            png, stats = render_request(volume, payload)
        finally:
            render_slots.release()
        return Response(
            content=png,
            media_type="image/png",
            headers={STATS_HEADER: json.dumps(stats)},
        )

    @app.get("/volumes/{vid}/slices/{axis}/{index}")
    def slice_image(
        vid: str,
        axis: str,
        index: int,
        window: float | None = None,
        level: float | None = None,
    ) -> Response:
        volume = store.get(vid)
        plane = _slice_plane(volume, axis, index)
        vmin, vmax = volume.value_range
        if window is None:
            window = float(max(vmax - vmin, 1))
        if level is None:
            level = (vmin + vmax) / 2.0
        return Response(
            content=encode_png_gray(window_level_map(plane, window, level)),
            media_type="image/png",
        )

    app.state.store = store
    app.state.render_slots = render_slots
    return app
