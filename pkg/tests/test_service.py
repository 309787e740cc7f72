"""HTTP service contract: uploads, renders, slices, error mapping."""

import io
import json
import zipfile

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from voxelray.phantoms import generate_phantom
from voxelray.service import STATS_HEADER, create_app, window_level_map
from voxelray.transfer import PRESET_NAMES


@pytest.fixture
def app(tmp_path):
    return create_app(tmp_path / "data")


@pytest.fixture
def client(app):
    return TestClient(app)


def zip_of(slices) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for i, blob in enumerate(slices):
            zf.writestr(f"slice_{i:03d}.dcm", blob)
    return buf.getvalue()


def upload_phantom(client, name="torso", dims=(32, 32, 32)) -> str:
    vol = generate_phantom(name, dims)
    manifest = json.dumps({"dims": list(vol.dims), "spacing": list(vol.spacing)})
    r = client.post(
        "/volumes",
        files={"file": ("vol.raw", vol.voxel_bytes())},
        data={"manifest": manifest},
    )
    assert r.status_code == 201, r.text
    return r.json()["id"]


def render_payload(size=32, **settings):
    return {
        "camera": {
            "position": [80.0, 16.0, 16.0],
            "look_at": [16.0, 16.0, 16.0],
            "width": size,
            "height": size,
        },
        "transfer": "bone",
        "settings": settings,
    }


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.text == "ok"


def test_presets_listing(client):
    r = client.get("/presets")
    assert r.status_code == 200
    body = r.json()
    assert set(body) == set(PRESET_NAMES)
    for tf in body.values():
        assert {"domain", "points"} <= set(tf)


def test_empty_store_lists_nothing(client):
    assert client.get("/volumes").json() == []


def test_upload_dicom_zip(client, make_slices):
    r = client.post(
        "/volumes", files={"file": ("ct.zip", zip_of(make_slices(count=3, rows=2, cols=2)))}
    )
    assert r.status_code == 201
    body = r.json()
    assert body["manifest"]["dims"] == [2, 2, 3]
    assert body["manifest"]["source"] == "dicom"
    listed = client.get("/volumes").json()
    assert [m["id"] for m in listed] == [body["id"]]


def test_upload_mixed_geometry_is_rejected(client, make_slices):
    blobs = make_slices(count=2, rows=2, cols=2) + make_slices(
        count=1, rows=2, cols=2, spacing=(2.0, 2.0), z0=5.0
    )
    r = client.post("/volumes", files={"file": ("ct.zip", zip_of(blobs))})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "InconsistentGeometry"


def test_upload_garbage_zip(client):
    r = client.post("/volumes", files={"file": ("ct.zip", b"this is not a zip")})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "InvalidUpload"


def test_upload_bad_manifest(client):
    r = client.post(
        "/volumes",
        files={"file": ("v.raw", b"\x00" * 16)},
        data={"manifest": '{"dims": [2, 2, 2]}'},  # spacing missing
    )
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "InvalidManifest"


def test_upload_size_mismatch_maps_to_400(client):
    manifest = json.dumps({"dims": [2, 2, 2], "spacing": [1, 1, 1]})
    r = client.post(
        "/volumes", files={"file": ("v.raw", b"\x00" * 10)}, data={"manifest": manifest}
    )
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "SizeMismatch"


def test_upload_cap(tmp_path):
    client = TestClient(create_app(tmp_path / "data", upload_cap=64))
    r = client.post("/volumes", files={"file": ("big.raw", b"\x00" * 200)})
    assert r.status_code == 413
    assert r.json()["error"]["code"] == "PayloadTooLarge"


def test_volume_detail_includes_block_stats(client):
    vid = upload_phantom(client)
    r = client.get(f"/volumes/{vid}")
    assert r.status_code == 200
    body = r.json()
    assert body["id"] == vid
    blocks = body["blocks"]
    assert blocks["count"] >= 1
    assert set(blocks["empty_by_preset"]) == set(PRESET_NAMES)


def test_unknown_volume_is_404(client):
    for path in ("/volumes/v-ffffffffffffffff",
                 "/volumes/v-ffffffffffffffff/slices/z/0"):
        r = client.get(path)
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "UnknownVolume"
    r = client.post("/volumes/v-ffffffffffffffff/render", json=render_payload())
    assert r.status_code == 404


def test_render_returns_png_and_stats(client):
    vid = upload_phantom(client)
    r = client.post(f"/volumes/{vid}/render", json=render_payload(use_blocks=True))
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert r.content.startswith(b"\x89PNG\r\n\x1a\n")
    stats = json.loads(r.headers[STATS_HEADER])
    assert stats["rays"] == 32 * 32
    assert stats["blocks_total"] >= 1
    img = Image.open(io.BytesIO(r.content))
    assert img.size == (32, 32)


def test_render_validation_codes(client):
    vid = upload_phantom(client)
    r = client.post(f"/volumes/{vid}/render", json={"settings": {}})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "InvalidSettings"

    bad = render_payload(mode="isosurface", isovalue=999999.0)
    r = client.post(f"/volumes/{vid}/render", json=bad)
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "IsovalueOutOfRange"

    r = client.post(f"/volumes/{vid}/render", json=render_payload(stepp=1.0))
    assert r.status_code == 422

    wrong_tf = render_payload()
    wrong_tf["transfer"] = "no-such-preset"
    r = client.post(f"/volumes/{vid}/render", json=wrong_tf)
    assert r.status_code == 422


def test_render_queue_full(app):
    client = TestClient(app)
    vid = upload_phantom(client)
    slots = app.state.render_slots
    held = 0
    while slots.acquire(blocking=False):
        held += 1
    try:
        r = client.post(f"/volumes/{vid}/render", json=render_payload())
        assert r.status_code == 503
        assert r.json()["error"]["code"] == "RenderQueueFull"
    finally:
        for _ in range(held):
            slots.release()
    assert client.post(f"/volumes/{vid}/render", json=render_payload()).status_code == 200


def test_slice_window_level_mapping(client):
    vid = upload_phantom(client, dims=(8, 8, 8))
    vol = generate_phantom("torso", (8, 8, 8))
    plane = vol.values[:, :, 3]
    v = int(plane[4, 4])

    r = client.get(f"/volumes/{vid}/slices/x/3", params={"window": 1, "level": v})
    assert r.status_code == 200
    gray = np.asarray(Image.open(io.BytesIO(r.content)))
    assert gray.shape == plane.shape
    assert gray[4, 4] == 128  # value at the level centre maps to mid-gray
    assert np.array_equal(gray, window_level_map(plane, 1.0, float(v)))

    # default window spans the whole value range
    r = client.get(f"/volumes/{vid}/slices/z/0")
    assert r.status_code == 200
    lo, hi = vol.value_range
    expected = window_level_map(vol.values[0], float(max(hi - lo, 1)), (lo + hi) / 2.0)
    assert np.array_equal(np.asarray(Image.open(io.BytesIO(r.content))), expected)


def test_slice_validation(client):
    vid = upload_phantom(client, dims=(8, 8, 8))
    assert client.get(f"/volumes/{vid}/slices/z/8").status_code == 422
    assert client.get(f"/volumes/{vid}/slices/w/0").status_code == 422
    assert client.get(f"/volumes/{vid}/slices/z/0", params={"window": 0}).status_code == 422
    assert client.get(f"/volumes/{vid}/slices/z/-1").status_code == 422


def test_restart_statelessness(tmp_path):
    data = tmp_path / "data"
    first = TestClient(create_app(data))
    vid = upload_phantom(first)
    payload = render_payload(classification="preintegrated")
    before = first.post(f"/volumes/{vid}/render", json=payload)

    second = TestClient(create_app(data))
    assert [m["id"] for m in second.get("/volumes").json()] == [vid]
    after = second.post(f"/volumes/{vid}/render", json=payload)
    assert after.content == before.content
    assert json.loads(after.headers[STATS_HEADER])["rays"] == 32 * 32


def test_cors_exposes_stats_header(client):
    r = client.options(
        "/volumes",
        headers={
            "Origin": "http://localhost:5173",
            "Access-Control-Request-Method": "GET",
        },
    )
    assert r.status_code == 200
    assert r.headers["access-control-allow-origin"] == "*"
    vid = upload_phantom(client)
    r = client.post(
        f"/volumes/{vid}/render",
        json=render_payload(),
        headers={"Origin": "http://localhost:5173"},
    )
    assert STATS_HEADER.lower() in r.headers.get("access-control-expose-headers", "").lower()


def test_dicom_upload_then_slice_round_trip(client, make_slices):
    # rescaled values survive the trip: slope 2, intercept -1000
    blobs = make_slices(count=4, rows=3, cols=3, slope=2.0, intercept=-1000.0)
    r = client.post("/volumes", files={"file": ("ct.zip", zip_of(blobs))})
    vid = r.json()["id"]
    sl = client.get(f"/volumes/{vid}/slices/z/1", params={"window": 1, "level": -980})
    gray = np.asarray(Image.open(io.BytesIO(sl.content)))
    # slice 1 pixels are arange(9)+10, rescaled to 2*(p)-1000: value -980
    # sits where arange hits 10, the first pixel
    assert gray[0, 0] == 128
