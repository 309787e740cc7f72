"""Triangle meshes, file round-trip, and a uniform spatial index.

Meshes are vertex/face soups: vertices (n, 3) float64 in millimetres,
faces (m, 3) int32 indices. Morphology estimates assume a closed,
consistently wound surface for inside tests; area sampling works on any
soup.

The grid index bins triangles by bounding box into uniform cells and
answers two queries: triangles near a ball, and triangles along an
axis-parallel ray, both as candidate supersets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v, f = self.vertices, self.faces
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must be (m, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face indices out of range")
        v.flags.writeable = False
        f.flags.writeable = False

    @property
    def triangle_count(self) -> int:
        return len(self.faces)

    def corners(self):
        """(a, b, c) arrays of shape (m, 3)."""
        v, f = self.vertices, self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def areas(self) -> np.ndarray:
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def make_mesh(vertices, faces) -> TriangleMesh:
    return TriangleMesh(
        np.ascontiguousarray(vertices, dtype=np.float64),
        np.ascontiguousarray(faces, dtype=np.int32),
    )


def translate(mesh: TriangleMesh, offset) -> TriangleMesh:
    return make_mesh(mesh.vertices + np.asarray(offset, dtype=np.float64), mesh.faces)


def scale(mesh: TriangleMesh, factor: float, origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    origin = np.asarray(origin, dtype=np.float64)
    return make_mesh((mesh.vertices - origin) * factor + origin, mesh.faces)


# OFF round-trip


def load_off(path_or_text) -> TriangleMesh:
    if hasattr(path_or_text, "read_text"):
        text = path_or_text.read_text()
    elif isinstance(path_or_text, str) and "\n" not in path_or_text:
        from pathlib import Path

        text = Path(path_or_text).read_text()
    else:
        text = path_or_text
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ValueError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    vertices = np.array(tokens[pos : pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        if k != 3:
            raise ValueError(f"only triangle faces supported, got {k}-gon")
        faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
        pos += k + 1
    return make_mesh(vertices, np.array(faces, dtype=np.int32).reshape(nf, 3))


def save_off(mesh: TriangleMesh, path) -> None:
    from pathlib import Path

    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(lines) + "\n")


# binary STL


def load_stl(path) -> TriangleMesh:
    from pathlib import Path

    data = Path(path).read_bytes()
    if len(data) < 84:
        raise ValueError("truncated STL")
    (count,) = struct.unpack_from("<I", data, 80)
    need = 84 + 50 * count
    if len(data) < need:
        raise ValueError(f"STL declares {count} triangles but is too short")
    tris = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    tris = tris.reshape(count, 50)
    coords = tris[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(np.float64)
    flat = coords.reshape(-1, 3)
    vertices, inverse = np.unique(flat, axis=0, return_inverse=True)
    faces = inverse.reshape(count, 3).astype(np.int32)
    return make_mesh(vertices, faces)


def save_stl(mesh: TriangleMesh, path) -> None:
    from pathlib import Path

    a, b, c = mesh.corners()
    n = np.cross(b - a, c - a)
    norms = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.where(norms > 0, n / np.maximum(norms, 1e-300), 0.0)
    count = len(mesh.faces)
    out = bytearray(b"\x00" * 80 + struct.pack("<I", count))
    rec = np.zeros((count, 50), dtype=np.uint8)
    packed = np.concatenate(
        [n.astype("<f4"), a.astype("<f4"), b.astype("<f4"), c.astype("<f4")], axis=1
    )
    rec[:, :48] = packed.view(np.uint8).reshape(count, 48)
    out += rec.tobytes()
    Path(path).write_bytes(bytes(out))


def load_mesh(path) -> TriangleMesh:
    """Load .off or .stl by file extension."""
    from pathlib import Path

    suffix = Path(path).suffix.lower()
    if suffix == ".off":
        return load_off(Path(path))
    if suffix == ".stl":
        return load_stl(path)
    raise ValueError(f"unsupported mesh format {suffix!r}, expected .off or .stl")


# generators


def make_box(lo, hi, segments: int = 1) -> TriangleMesh:
    """Axis-aligned box with outward-wound faces.

    segments subdivides each face into a segments x segments quad grid;
    finer faces keep Monte Carlo variance low when a probe ball clips a
    small patch of a large wall.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if segments < 1:
        raise ValueError(f"segments must be >= 1, got {segments}")

    verts: list[tuple[float, float, float]] = []
    cache: dict[tuple[float, float, float], int] = {}
    faces: list[tuple[int, int, int]] = []

    def vid(p):
        key = (float(p[0]), float(p[1]), float(p[2]))
        if key not in cache:
            cache[key] = len(verts)
            verts.append(key)
        return cache[key]

    def emit_face(origin, eu, ev):
        """One wall as a segments^2 grid; (eu x ev) points outward."""
        for i in range(segments):
            for j in range(segments):
                p00 = origin + eu * (i / segments) + ev * (j / segments)
                p10 = origin + eu * ((i + 1) / segments) + ev * (j / segments)
                p01 = origin + eu * (i / segments) + ev * ((j + 1) / segments)
                p11 = origin + eu * ((i + 1) / segments) + ev * ((j + 1) / segments)
                a, b, c, d = vid(p00), vid(p10), vid(p11), vid(p01)
                faces.append((a, b, c))
                faces.append((a, c, d))

    ex = np.array([hi[0] - lo[0], 0.0, 0.0])
    ey = np.array([0.0, hi[1] - lo[1], 0.0])
    ez = np.array([0.0, 0.0, hi[2] - lo[2]])
    emit_face(lo, ey, ex)                    # bottom, normal -z
    emit_face(lo + ez, ex, ey)               # top, normal +z
    emit_face(lo, ex, ez)                    # front, normal -y
    emit_face(lo + ey, ez, ex)               # back, normal +y
    emit_face(lo, ez, ey)                    # left, normal -x
    emit_face(lo + ex, ey, ez)               # right, normal +x

    return make_mesh(np.array(verts), np.array(faces, dtype=np.int32))


def make_icosphere(center=(0.0, 0.0, 0.0), radius: float = 1.0, subdivisions: int = 3) -> TriangleMesh:
    """Geodesic sphere from a subdivided icosahedron; deterministic."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) for v in verts]
    verts = [v / np.linalg.norm(v) for v in verts]

    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for i, j, k in faces:
            a = midpoint(i, j)
            b = midpoint(j, k)
            c = midpoint(k, i)
            new_faces += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = new_faces

    vertices = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return make_mesh(vertices, np.array(faces, dtype=np.int32))


# uniform grid index


@dataclass(frozen=True)
class GridIndex:
    """Triangles binned into uniform cells by bounding box."""

    origin: np.ndarray
    cell: float
    dims: tuple[int, int, int]
    cell_start: np.ndarray
    tri_ids: np.ndarray

    def _cell_of(self, p):
        c = np.floor((np.asarray(p, dtype=np.float64) - self.origin) / self.cell)
        return np.clip(c.astype(np.int64), 0, np.array(self.dims) - 1)

    def _flat(self, ix, iy, iz):
        nx, ny, _nz = self.dims
        return (iz * ny + iy) * nx + ix

    def near_ball(self, center, radius: float) -> np.ndarray:
        """Candidate triangle ids whose cells overlap the ball's box."""
        lo = self._cell_of(np.asarray(center) - radius)
        hi = self._cell_of(np.asarray(center) + radius)
        parts = []
        for iz in range(lo[2], hi[2] + 1):
            for iy in range(lo[1], hi[1] + 1):
                for ix in range(lo[0], hi[0] + 1):
                    f = self._flat(ix, iy, iz)
                    parts.append(self.tri_ids[self.cell_start[f] : self.cell_start[f + 1]])
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(parts))

    def along_ray_x(self, origin) -> np.ndarray:
        """Candidate triangle ids for a +x axis ray from origin."""
        ox = origin[0]
        iy = int(self._cell_of(origin)[1])
        iz = int(self._cell_of(origin)[2])
        if origin[1] < self.origin[1] or origin[2] < self.origin[2]:
            return np.empty(0, dtype=np.int64)
        nx, ny, nz = self.dims
        if iy >= ny or iz >= nz:
            return np.empty(0, dtype=np.int64)
        ix0 = int(np.floor((ox - self.origin[0]) / self.cell))
        if ix0 >= nx:
            return np.empty(0, dtype=np.int64)
        ix0 = max(ix0, 0)
        parts = []
        for ix in range(ix0, nx):
            f = self._flat(ix, iy, iz)
            parts.append(self.tri_ids[self.cell_start[f] : self.cell_start[f + 1]])
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(parts))


def build_grid_index(mesh: TriangleMesh, target_cells: int = 100_000) -> GridIndex:
    """Index triangles into cells sized for roughly target_cells total."""
    lo, hi = mesh.bounds()
    span = np.maximum(hi - lo, 1e-9)
    cell = float((span.prod() / target_cells) ** (1.0 / 3.0))
    cell = max(cell, float(span.min()) / 512.0, 1e-9)
    dims = tuple(int(np.ceil(s / cell)) + 1 for s in span)
    nx, ny, nz = dims
    ncells = nx * ny * nz

    a, b, c = mesh.corners()
    tlo = np.minimum(np.minimum(a, b), c)
    thi = np.maximum(np.maximum(a, b), c)
    clo = np.clip(np.floor((tlo - lo) / cell).astype(np.int64), 0, np.array(dims) - 1)
    chi = np.clip(np.floor((thi - lo) / cell).astype(np.int64), 0, np.array(dims) - 1)

    counts = np.zeros(ncells + 1, dtype=np.int64)
    spans = []
    for t in range(len(mesh.faces)):
        x0, y0, z0 = clo[t]
        x1, y1, z1 = chi[t]
        cells = []
        for iz in range(z0, z1 + 1):
            for iy in range(y0, y1 + 1):
                base = (iz * ny + iy) * nx
                for ix in range(x0, x1 + 1):
                    cells.append(base + ix)
        spans.append(cells)
        for f in cells:
            counts[f + 1] += 1

    cell_start = np.cumsum(counts)
    fill = cell_start[:-1].copy()
    tri_ids = np.empty(int(cell_start[-1]), dtype=np.int64)
    for t, cells in enumerate(spans):
        for f in cells:
            tri_ids[fill[f]] = t
            fill[f] += 1

    return GridIndex(
        origin=lo.copy(),
        cell=cell,
        dims=dims,
        cell_start=cell_start,
        tri_ids=tri_ids,
    )
