"""Transfer functions and their classification tables.

A transfer function maps scalar value to straight (non-premultiplied) RGBA
via piecewise-linear control points, clamping outside the endpoints. Opacity
is defined per reference step length; the renderer corrects it for the
actual sampling step.

Three derived forms feed the renderer: a binned lookup table for
post-classification, a preclassified 8-bit RGBA volume, and a pre-integrated
segment table indexed by the scalars at both ends of a sampling segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .volume import ScalarVolume

LUT_BINS = 4096
PREINT_BINS = 256
PREINT_SUBSTEPS = 64


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear RGBA map over a scalar domain.

    values is strictly increasing, shape (n,); rgba is (n, 4) in [0, 1].
    domain is the (lo, hi) range that derived tables cover, lo < hi.
    """

    values: np.ndarray
    rgba: np.ndarray
    domain: tuple[float, float]

    def __post_init__(self):
        v, c = self.values, self.rgba
        if v.ndim != 1 or v.size == 0:
            raise ValueError("need at least one control point")
        if c.shape != (v.size, 4):
            raise ValueError(f"rgba shape {c.shape} does not match {v.size} points")
        if np.any(np.diff(v) <= 0):
            raise ValueError("control point values must be strictly increasing")
        if np.any((c < 0) | (c > 1)):
            raise ValueError("rgba channels must lie in [0, 1]")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"domain must satisfy lo < hi, got {self.domain}")
        v.flags.writeable = False
        c.flags.writeable = False

    def evaluate(self, scalars):
        """Straight RGBA at the given scalar(s), clamped at the endpoints."""
        s = np.asarray(scalars, dtype=np.float64)
        out = np.empty(s.shape + (4,))
        for ch in range(4):
            out[..., ch] = np.interp(s, self.values, self.rgba[:, ch])
        return out

    def to_dict(self) -> dict:
        return {
            "domain": [float(self.domain[0]), float(self.domain[1])],
            "points": [
                {
                    "value": float(v),
                    "color": [float(c) for c in rgba[:3]],
                    "opacity": float(rgba[3]),
                }
                for v, rgba in zip(self.values, self.rgba)
            ],
        }


def transfer_from_points(points, domain=None) -> TransferFunction:
    """Build a TransferFunction from (value, r, g, b, opacity) tuples."""
    pts = sorted(points, key=lambda p: p[0])
    values = np.array([p[0] for p in pts], dtype=np.float64)
    rgba = np.array([[p[1], p[2], p[3], p[4]] for p in pts], dtype=np.float64)
    if domain is None:
        domain = (float(values[0]), float(values[-1]))
    return TransferFunction(values, rgba, (float(domain[0]), float(domain[1])))


def transfer_from_dict(data: dict) -> TransferFunction:
    points = [
        (p["value"], p["color"][0], p["color"][1], p["color"][2], p["opacity"])
        for p in data["points"]
    ]
    return transfer_from_points(points, domain=data.get("domain"))


def load_transfer(path) -> TransferFunction:
    return transfer_from_dict(json.loads(Path(path).read_text()))


def save_transfer(tf: TransferFunction, path) -> None:
    Path(path).write_text(json.dumps(tf.to_dict(), indent=2))


@dataclass(frozen=True)
class ClassifiedLUT:
    """Binned RGBA lookup over a domain, sampled at bin centres."""

    rgba: np.ndarray
    domain: tuple[float, float]

    @property
    def bins(self) -> int:
        return self.rgba.shape[0]

    @property
    def bin_width(self) -> float:
        lo, hi = self.domain
        return (hi - lo) / self.bins

    def bin_index(self, scalars):
        """Nearest bin after clamping to the domain."""
        s = np.asarray(scalars, dtype=np.float64)
        lo, _hi = self.domain
        idx = np.floor((s - lo) / self.bin_width).astype(np.int64)
        return np.clip(idx, 0, self.bins - 1)

    def classify(self, scalars):
        """Straight RGBA for the given scalar(s) by bin lookup."""
        return self.rgba[self.bin_index(scalars)]

    def opacity_prefix(self) -> np.ndarray:
        """prefix[i] = number of bins below i with nonzero opacity."""
        return np.concatenate([[0], np.cumsum(self.rgba[:, 3] > 0)])


def build_lut(tf: TransferFunction, bins: int = LUT_BINS) -> ClassifiedLUT:
    lo, hi = tf.domain
    centres = lo + (np.arange(bins) + 0.5) * (hi - lo) / bins
    return ClassifiedLUT(tf.evaluate(centres), tf.domain)


def preclassify_volume(volume: ScalarVolume, lut: ClassifiedLUT) -> np.ndarray:
    """Paint every voxel through the LUT; returns uint8, shape (nz, ny, nx, 4)."""
    rgba = lut.classify(volume.values)
    return np.rint(rgba * 255.0).astype(np.uint8)


@dataclass(frozen=True)
class PreintegratedTable:
    """Segment table over (front scalar, back scalar) bin pairs.

    rgba[i, j] holds the premultiplied colour and opacity of one sampling
    segment of the given length whose endpoint scalars fall in bins i and j,
    assuming the scalar ramps linearly between them.
    """

    rgba: np.ndarray
    domain: tuple[float, float]
    length: float

    @property
    def bins(self) -> int:
        return self.rgba.shape[0]


def build_preintegrated(
    lut: ClassifiedLUT,
    length: float,
    ref_step: float | None = None,
    bins: int = PREINT_BINS,
    substeps: int = PREINT_SUBSTEPS,
) -> PreintegratedTable:
    """Numerically integrate segments for every scalar bin pair.

    Each segment is split into ``substeps`` equal slices; the scalar ramps
    linearly front to back, each slice is classified through the LUT, its
    opacity corrected from ref_step to the slice length, and the slices are
    composited front to back. ref_step defaults to the segment length.
    """
    if ref_step is None:
        ref_step = length
    lo, hi = lut.domain
    centres = lo + (np.arange(bins) + 0.5) * (hi - lo) / bins
    front = centres[:, None, None]
    back = centres[None, :, None]
    frac = (np.arange(substeps) + 0.5)[None, None, :] / substeps
    scalars = front + (back - front) * frac

    slice_rgba = lut.classify(scalars)
    ds = length / substeps
    a_hat = 1.0 - (1.0 - slice_rgba[..., 3]) ** (ds / ref_step)

    out = np.zeros((bins, bins, 4))
    trans = 1.0 - out[..., 3]
    for i in range(substeps):
        w = trans * a_hat[..., i]
        out[..., 0] += w * slice_rgba[..., i, 0]
        out[..., 1] += w * slice_rgba[..., i, 1]
        out[..., 2] += w * slice_rgba[..., i, 2]
        out[..., 3] += w
        trans = 1.0 - out[..., 3]
    return PreintegratedTable(out, lut.domain, length)


# presets; every opacity ramp is monotone non-decreasing so that interval
# emptiness tests agree exactly with per-voxel scans
_PRESETS = {
    "grayscale": [
        (-1000.0, 0.00, 0.00, 0.00, 0.00),
        (2000.0, 1.00, 1.00, 1.00, 1.00),
    ],
    "bone": [
        (-1000.0, 0.00, 0.00, 0.00, 0.00),
        (550.0, 0.40, 0.28, 0.16, 0.00),
        (800.0, 0.85, 0.78, 0.62, 0.70),
        (1400.0, 0.98, 0.96, 0.90, 0.95),
        (2000.0, 1.00, 1.00, 1.00, 1.00),
    ],
    "soft-tissue": [
        (-1000.0, 0.00, 0.00, 0.00, 0.00),
        (-350.0, 0.55, 0.25, 0.15, 0.00),
        (-50.0, 0.70, 0.40, 0.30, 0.05),
        (100.0, 0.80, 0.45, 0.35, 0.12),
        (500.0, 0.90, 0.80, 0.70, 0.40),
        (900.0, 0.98, 0.95, 0.90, 0.85),
        (2000.0, 1.00, 1.00, 1.00, 0.95),
    ],
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def get_preset(name: str) -> TransferFunction:
    """One of the named presets; domain (-1000, 2000) covers CT values."""
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}, expected one of {PRESET_NAMES}")
    return transfer_from_points(_PRESETS[name], domain=(-1000.0, 2000.0))


def resolve_transfer(spec) -> TransferFunction:
    """Accept a preset name, a dict ({"preset": ...} or control points),
    a JSON file path, or a ready TransferFunction. The CLI and the HTTP
    service both funnel through here so their schemas cannot drift.
    """
    if isinstance(spec, TransferFunction):
        return spec
    if isinstance(spec, dict):
        if "preset" in spec:
            return get_preset(str(spec["preset"]))
        return transfer_from_dict(spec)
    name = str(spec)
    if name in _PRESETS:
        return get_preset(name)
    if Path(name).is_file():
        return load_transfer(name)
    raise ValueError(
        f"transfer {name!r} is neither a preset ({', '.join(_PRESETS)}) nor a file"
    )


def windowed_transfer(window: float, level: float) -> TransferFunction:
    """Grayscale ramp over [level - window/2, level + window/2].

    Opacity ramps with brightness, black transparent to white opaque.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    lo = level - window / 2.0
    hi = level + window / 2.0
    return transfer_from_points(
        [(lo, 0.0, 0.0, 0.0, 0.0), (hi, 1.0, 1.0, 1.0, 1.0)], domain=(lo, hi)
    )
