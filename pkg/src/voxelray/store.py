"""Content-addressed on-disk volume store.

Each volume lives under ``<root>/<id>/`` as ``data.raw`` (little-endian
int16 samples, x fastest) plus ``manifest.json``. The id is derived from
the sample bytes and geometry, so re-adding identical content is a no-op
and ids are stable across processes. Decoded volumes are held in a small
LRU cache; mutations go through a lock and land on disk atomically
(write-to-temp then rename, manifest last).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import UnknownVolume
from .volume import ScalarVolume, load_raw

SOURCES = ("dicom", "raw", "phantom")
DEFAULT_CACHE_SIZE = 4


@dataclass(frozen=True)
class VolumeManifest:
    """Stored-volume metadata as returned by the store and the service."""

    id: str
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    value_range: tuple[int, int]
    source: str
    created_at: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dims": list(self.dims),
            "spacing": list(self.spacing),
            "value_range": list(self.value_range),
            "source": self.source,
            "created_at": self.created_at,
        }


def manifest_from_dict(d: dict) -> VolumeManifest:
    return VolumeManifest(
        id=str(d["id"]),
        dims=tuple(int(x) for x in d["dims"]),
        spacing=tuple(float(x) for x in d["spacing"]),
        value_range=tuple(int(x) for x in d["value_range"]),
        source=str(d["source"]),
        created_at=str(d["created_at"]),
    )


def volume_id(volume: ScalarVolume) -> str:
    """Deterministic id from geometry and sample bytes."""
    h = hashlib.sha256()
    h.update(json.dumps([list(volume.dims), list(volume.spacing)]).encode())
    h.update(volume.voxel_bytes())
    return "v-" + h.hexdigest()[:16]


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class VolumeStore:
    """Directory-backed volume collection with a bounded decode cache."""

    def __init__(self, root, cache_size: int = DEFAULT_CACHE_SIZE):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.cache_size = max(int(cache_size), 0)
        self._lock = threading.RLock()
        self._index: dict[str, VolumeManifest] = {}
        self._cache: OrderedDict[str, ScalarVolume] = OrderedDict()
        self._scan()

    def _scan(self) -> None:
        for entry in sorted(self.root.iterdir()):
            mpath = entry / "manifest.json"
            if entry.is_dir() and mpath.exists():
                m = manifest_from_dict(json.loads(mpath.read_text()))
                self._index[m.id] = m

    def add(self, volume: ScalarVolume, source: str) -> VolumeManifest:
        """Persist a volume; returns its manifest. Idempotent per content."""
        if source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {source!r}")
        vid = volume_id(volume)
        with self._lock:
            existing = self._index.get(vid)
            if existing is not None:
                return existing
            manifest = VolumeManifest(
                id=vid,
                dims=volume.dims,
                spacing=volume.spacing,
                value_range=volume.value_range,
                source=source,
                created_at=datetime.now(timezone.utc).isoformat(),
            )
            vdir = self.root / vid
            vdir.mkdir(exist_ok=True)
            # data first so a manifest on disk always points at complete bytes
            _atomic_write(vdir / "data.raw", volume.voxel_bytes())
            _atomic_write(
                vdir / "manifest.json",
                json.dumps(manifest.to_dict(), indent=2).encode(),
            )
            self._index[vid] = manifest
            self._remember(vid, volume)
            return manifest

    def manifest(self, vid: str) -> VolumeManifest:
        with self._lock:
            try:
                return self._index[vid]
            except KeyError:
                raise UnknownVolume(f"no volume stored under id {vid!r}") from None

    def get(self, vid: str) -> ScalarVolume:
        """Decoded volume for an id, via the LRU cache."""
        with self._lock:
            cached = self._cache.get(vid)
            if cached is not None:
                self._cache.move_to_end(vid)
                return cached
            manifest = self.manifest(vid)
            data = (self.root / vid / "data.raw").read_bytes()
        volume = load_raw(data, manifest.dims, manifest.spacing)
        with self._lock:
            self._remember(vid, volume)
        return volume

    def list(self) -> list[VolumeManifest]:
        with self._lock:
            return sorted(self._index.values(), key=lambda m: (m.created_at, m.id))

    def __contains__(self, vid: str) -> bool:
        with self._lock:
            return vid in self._index

    def __len__(self) -> int:
        with self._lock:
            return len(self._index)

    def _remember(self, vid: str, volume: ScalarVolume) -> None:
        if self.cache_size == 0:
            return
        self._cache[vid] = volume
        self._cache.move_to_end(vid)
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
