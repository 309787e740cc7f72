"""Local surface-to-volume ratio estimation on triangle meshes.

For a probe ball B(p, R) against a closed mesh X, the estimate is

    svr = area(surface of X inside B) / volume(interior of X inside B)

and is undefined when the clipped volume is zero. Both quantities come
from Monte Carlo sampling with reported standard errors:

* area: triangles fully inside the ball count exactly (a triangle with
  all corners inside a ball lies inside it by convexity); triangles the
  ball may cut get uniform barycentric samples, and the inside fraction
  scales their area. Samples are distributed over candidates by area.
* volume: points drawn uniformly in the ball are tested against the mesh
  by +x ray parity. Parity hits that graze an edge, a vertex, or the
  sample itself trigger a deterministic retry with a jittered direction
  drawn from the same stream.

Determinism: every probe point uses its own generator seeded from
(base_seed, point_index), so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import GridIndex, TriangleMesh, build_grid_index

DEFAULT_AREA_SAMPLES = 20_000
DEFAULT_VOLUME_SAMPLES = 20_000

_EDGE_EPS = 1e-9
_T_EPS = 1e-9
_MAX_RETRIES = 16


@dataclass(frozen=True)
class SvrResult:
    """Estimate at one probe point; svr is None when volume is zero."""

    point: tuple[float, float, float]
    radius: float
    area: float
    area_stderr: float
    volume: float
    volume_stderr: float
    svr: float | None
    svr_stderr: float | None
    n_area: int
    n_volume: int

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "radius": self.radius,
            "area": self.area,
            "area_stderr": self.area_stderr,
            "volume": self.volume,
            "volume_stderr": self.volume_stderr,
            "svr": self.svr,
            "svr_stderr": self.svr_stderr,
            "n_area": self.n_area,
            "n_volume": self.n_volume,
        }


def clipped_area(
    mesh: TriangleMesh,
    center,
    radius: float,
    n_samples: int = DEFAULT_AREA_SAMPLES,
    rng: np.random.Generator | None = None,
    index: GridIndex | None = None,
) -> tuple[float, float]:
    """Surface area of the mesh inside the ball, with standard error."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    rng = rng or np.random.default_rng(0)
    index = index or build_grid_index(mesh)
    center = np.asarray(center, dtype=np.float64)

    cand = index.near_ball(center, radius)
    if cand.size == 0:
        return 0.0, 0.0
    v, f = mesh.vertices, mesh.faces
    a = v[f[cand, 0]]
    b = v[f[cand, 1]]
    c = v[f[cand, 2]]
    r2 = radius * radius
    inside = (
        (((a - center) ** 2).sum(axis=1) <= r2).astype(np.int64)
        + (((b - center) ** 2).sum(axis=1) <= r2)
        + (((c - center) ** 2).sum(axis=1) <= r2)
    )
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    total = float(areas[inside == 3].sum())
    variance = 0.0

    # partially inside, or possibly cut without any corner inside
    partial = np.nonzero(inside != 3)[0]
    if partial.size:
        # cheap reject: triangle bounding sphere far from the probe ball
        centroid = (a[partial] + b[partial] + c[partial]) / 3.0
        spread = np.maximum(
            np.linalg.norm(a[partial] - centroid, axis=1),
            np.maximum(
                np.linalg.norm(b[partial] - centroid, axis=1),
                np.linalg.norm(c[partial] - centroid, axis=1),
            ),
        )
        reach = np.linalg.norm(centroid - center, axis=1) - spread
        partial = partial[reach <= radius]

    if partial.size:
        part_areas = areas[partial]
        weights = part_areas / part_areas.sum()
        counts = np.floor(weights * n_samples).astype(np.int64)
        remainder = n_samples - int(counts.sum())
        if remainder > 0:
            order = np.argsort(-(weights * n_samples - counts), kind="stable")
            counts[order[:remainder]] += 1
        counts = np.maximum(counts, 1)

        for i, t in enumerate(partial):
            k = int(counts[i])
            r1 = rng.random(k)
            r2u = rng.random(k)
            sq = np.sqrt(r1)
            pts = (
                (1.0 - sq)[:, None] * a[t]
                + (sq * (1.0 - r2u))[:, None] * b[t]
                + (sq * r2u)[:, None] * c[t]
            )
            hit = ((pts - center) ** 2).sum(axis=1) <= r2
            p_hat = hit.mean()
            total += float(part_areas[i]) * float(p_hat)
            variance += (float(part_areas[i]) ** 2) * float(p_hat * (1 - p_hat)) / k

    return total, math.sqrt(variance)


def _parity_batch(origins, a, b, c, direction):
    """Crossing counts for one direction; also flags suspect samples.

    origins (n, 3); a/b/c (m, 3) candidate corners; returns (counts (n,),
    suspect (n,)) where suspect marks grazing hits needing a retry.
    """
    e1 = b - a
    e2 = c - a
    p = np.cross(direction, e2)
    det = (e1 * p).sum(axis=1)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0, 0.0) / np.where(ok, det, 1.0)

    s = origins[:, None, :] - a[None, :, :]
    u = (s * p[None, :, :]).sum(axis=2) * inv[None, :]
    q = np.cross(s, e1[None, :, :])
    vv = (q * direction[None, None, :]).sum(axis=2) * inv[None, :]
    t = (q * e2[None, :, :]).sum(axis=2) * inv[None, :]

    hit = ok[None, :] & (u >= 0.0) & (vv >= 0.0) & (u + vv <= 1.0) & (t > _T_EPS)
    counts = hit.sum(axis=1)
    margin = np.minimum(np.minimum(u, vv), 1.0 - u - vv)
    suspect = (hit & ((margin < _EDGE_EPS) | (t < 1e-7))).any(axis=1)
    return counts, suspect


def _inside_by_rows(mesh, index, points, rng):
    """Parity inside test for many points, batched by index row."""
    v, f = mesh.vertices, mesh.faces
    n = len(points)
    inside = np.zeros(n, dtype=bool)
    if n == 0:
        return inside

    # points whose +x ray cannot reach the mesh box are outside outright;
    # they must not join a row batch or they would poison its candidates
    grid_hi = index.origin + np.array(index.dims) * index.cell
    searchable = (
        (points[:, 1] >= index.origin[1])
        & (points[:, 1] <= grid_hi[1])
        & (points[:, 2] >= index.origin[2])
        & (points[:, 2] <= grid_hi[2])
        & (points[:, 0] <= grid_hi[0])
    )
    idx = np.nonzero(searchable)[0]
    if idx.size == 0:
        return inside

    cells = np.floor((points[idx] - index.origin) / index.cell).astype(np.int64)
    cells = np.clip(cells, 0, np.array(index.dims) - 1)
    keys = cells[:, 2] * index.dims[1] + cells[:, 1]
    order = idx[np.argsort(keys, kind="stable")]
    keys = np.sort(keys, kind="stable")
    x_axis = np.array([1.0, 0.0, 0.0])

    start = 0
    while start < len(order):
        end = start
        while end < len(order) and keys[end] == keys[start]:
            end += 1
        batch = order[start:end]
        # candidates must cover the ray of the lowest-x sample in the row
        probe = points[batch[0]].copy()
        probe[0] = points[batch, 0].min()
        cand = index.along_ray_x(probe)
        if cand.size:
            a = v[f[cand, 0]]
            b = v[f[cand, 1]]
            c = v[f[cand, 2]]
            counts, suspect = _parity_batch(points[batch], a, b, c, x_axis)
            inside[batch] = (counts % 2) == 1
            for i in np.nonzero(suspect)[0]:
                inside[batch[i]] = _inside_retry(mesh, points[batch[i]], rng)
        start = end
    return inside


def _inside_retry(mesh, point, rng):
    """Re-test one point with jittered ray directions against all triangles."""
    v, f = mesh.vertices, mesh.faces
    a = v[f[:, 0]]
    b = v[f[:, 1]]
    c = v[f[:, 2]]
    for _ in range(_MAX_RETRIES):
        d = np.array([1.0, 0.0, 0.0]) + 1e-3 * rng.standard_normal(3)
        d /= np.linalg.norm(d)
        counts, suspect = _parity_batch(point[None, :], a, b, c, d)
        if not suspect[0]:
            return (counts[0] % 2) == 1
    raise RuntimeError("parity test failed to find a clean ray direction")


def clipped_volume(
    mesh: TriangleMesh,
    center,
    radius: float,
    n_samples: int = DEFAULT_VOLUME_SAMPLES,
    rng: np.random.Generator | None = None,
    index: GridIndex | None = None,
) -> tuple[float, float]:
    """Volume of the mesh interior inside the ball, with standard error."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    rng = rng or np.random.default_rng(0)
    index = index or build_grid_index(mesh)
    center = np.asarray(center, dtype=np.float64)

    # quick reject: ball entirely outside the mesh bounding box
    lo, hi = mesh.bounds()
    if np.any(center + radius < lo) or np.any(center - radius > hi):
        return 0.0, 0.0

    dirs = rng.standard_normal((n_samples, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(n_samples) ** (1.0 / 3.0)
    points = center + dirs * radii[:, None]

    inside = _inside_by_rows(mesh, index, points, rng)
    p_hat = inside.mean()
    ball = 4.0 / 3.0 * math.pi * radius**3
    stderr = ball * math.sqrt(p_hat * (1.0 - p_hat) / n_samples)
    return ball * float(p_hat), float(stderr)


def svr_at_point(
    mesh: TriangleMesh,
    point,
    radius: float,
    n_area: int = DEFAULT_AREA_SAMPLES,
    n_volume: int = DEFAULT_VOLUME_SAMPLES,
    rng: np.random.Generator | None = None,
    index: GridIndex | None = None,
) -> SvrResult:
    """Surface-to-volume ratio of the mesh within B(point, radius)."""
    rng = rng or np.random.default_rng(0)
    index = index or build_grid_index(mesh)
    point = np.asarray(point, dtype=np.float64)

    volume, vol_err = clipped_volume(mesh, point, radius, n_volume, rng, index)
    area, area_err = clipped_area(mesh, point, radius, n_area, rng, index)

    if volume == 0.0:
        svr = None
        svr_err = None
    else:
        svr = area / volume
        rel_a = area_err / area if area > 0 else 0.0
        rel_v = vol_err / volume
        svr_err = svr * math.sqrt(rel_a**2 + rel_v**2)
    return SvrResult(
        point=tuple(float(x) for x in point),
        radius=float(radius),
        area=float(area),
        area_stderr=float(area_err),
        volume=float(volume),
        volume_stderr=float(vol_err),
        svr=svr,
        svr_stderr=svr_err,
        n_area=n_area,
        n_volume=n_volume,
    )


def svr_field(
    mesh: TriangleMesh,
    points,
    radius: float,
    base_seed: int = 0,
    n_area: int = DEFAULT_AREA_SAMPLES,
    n_volume: int = DEFAULT_VOLUME_SAMPLES,
) -> list[SvrResult]:
    """SVR at many probe points.

    Point i uses a generator seeded from (base_seed, i), so the result for
    a point is independent of which other points are evaluated.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    index = build_grid_index(mesh)
    results = []
    for i, p in enumerate(points):
        rng = np.random.default_rng(np.random.SeedSequence([int(base_seed), i]))
        results.append(
            svr_at_point(mesh, p, radius, n_area, n_volume, rng, index)
        )
    return results


def svr_to_csv(results: list[SvrResult], path) -> None:
    """index,x,y,z,radius,area,area_stderr,volume,volume_stderr,svr,svr_stderr,defined"""
    import csv
    from pathlib import Path

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "index", "x", "y", "z", "radius",
                "area", "area_stderr", "volume", "volume_stderr",
                "svr", "svr_stderr", "defined",
            ]
        )
        for i, r in enumerate(results):
            w.writerow(
                [
                    i, r.point[0], r.point[1], r.point[2], r.radius,
                    r.area, r.area_stderr, r.volume, r.volume_stderr,
                    "" if r.svr is None else r.svr,
                    "" if r.svr_stderr is None else r.svr_stderr,
                    int(r.svr is not None),
                ]
            )


def svr_to_ply(results: list[SvrResult], path) -> None:
    """Colored point cloud: blue (low) to red (high), gray when undefined."""
    from pathlib import Path

    defined = [r.svr for r in results if r.svr is not None]
    lo = min(defined) if defined else 0.0
    hi = max(defined) if defined else 1.0
    span = hi - lo if hi > lo else 1.0

    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(results)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for r in results:
        x, y, z = r.point
        if r.svr is None:
            rgb = (128, 128, 128)
        else:
            f = (r.svr - lo) / span
            rgb = (int(round(255 * f)), 0, int(round(255 * (1.0 - f))))
        lines.append(f"{x:.6g} {y:.6g} {z:.6g} {rgb[0]} {rgb[1]} {rgb[2]}")
    Path(path).write_text("\n".join(lines) + "\n")
