"""Content-addressed volume store: ids, idempotence, cache, rescan."""

import json

import numpy as np
import pytest

from voxelray.errors import UnknownVolume
from voxelray.store import VolumeStore, manifest_from_dict, volume_id
from voxelray.volume import make_volume


def vol(seed, dims=(6, 5, 4), spacing=(1.0, 1.0, 1.5)):
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    values = rng.integers(-1000, 2000, size=(nz, ny, nx), dtype=np.int16)
    return make_volume(values, spacing)


def test_id_depends_on_content_and_geometry():
    a = vol(1)
    assert volume_id(a) == volume_id(vol(1))
    assert volume_id(a) != volume_id(vol(2))
    assert volume_id(a) != volume_id(vol(1, spacing=(1.0, 1.0, 2.0)))
    assert volume_id(a).startswith("v-") and len(volume_id(a)) == 18


def test_add_and_get_round_trip(store):
    v = vol(3)
    m = store.add(v, "raw")
    assert m.id == volume_id(v)
    assert m.dims == v.dims and m.spacing == v.spacing
    assert m.source == "raw"
    back = store.get(m.id)
    assert np.array_equal(back.values, v.values)
    assert back.spacing == v.spacing


def test_add_is_idempotent(store):
    v = vol(4)
    first = store.add(v, "raw")
    second = store.add(v, "dicom")  # same bytes, later source loses
    assert second is first
    assert len(store) == 1
    assert store.list()[0].source == "raw"


def test_add_rejects_unknown_source(store):
    with pytest.raises(ValueError):
        store.add(vol(5), "download")


def test_unknown_volume(store):
    with pytest.raises(UnknownVolume):
        store.manifest("v-0000000000000000")
    with pytest.raises(UnknownVolume):
        store.get("nope")
    assert "nope" not in store


def test_listing_orders_by_creation(store):
    ids = [store.add(vol(s), "phantom").id for s in (10, 11, 12)]
    assert [m.id for m in store.list()] == ids


def test_rescan_after_restart(tmp_path):
    root = tmp_path / "st"
    first = VolumeStore(root)
    v = vol(6)
    vid = first.add(v, "raw").id

    second = VolumeStore(root)
    assert vid in second
    assert len(second) == 1
    assert np.array_equal(second.get(vid).values, v.values)
    assert second.manifest(vid).to_dict() == first.manifest(vid).to_dict()


def test_cache_is_bounded_lru(tmp_path):
    store = VolumeStore(tmp_path / "st", cache_size=2)
    vids = [store.add(vol(s), "raw").id for s in range(3)]
    assert list(store._cache) == vids[1:]  # oldest decoded entry evicted
    store.get(vids[1])
    store.get(vids[0])  # refetch from disk, evicting vids[2]
    assert list(store._cache) == [vids[1], vids[0]]


def test_cache_size_zero_still_serves(tmp_path):
    store = VolumeStore(tmp_path / "st", cache_size=0)
    vid = store.add(vol(7), "raw").id
    assert len(store._cache) == 0
    assert np.array_equal(store.get(vid).values, vol(7).values)


def test_on_disk_layout(store):
    v = vol(8)
    vid = store.add(v, "raw").id
    vdir = store.root / vid
    raw = (vdir / "data.raw").read_bytes()
    assert raw == v.voxel_bytes()
    assert not list(vdir.glob("*.tmp"))  # atomic writes leave no temp files
    manifest = manifest_from_dict(json.loads((vdir / "manifest.json").read_text()))
    assert manifest.id == vid
    assert manifest.value_range == v.value_range


def test_partial_directory_is_ignored(tmp_path):
    root = tmp_path / "st"
    root.mkdir()
    (root / "v-deadbeef00000000").mkdir()  # data dir without manifest
    store = VolumeStore(root)
    assert len(store) == 0
