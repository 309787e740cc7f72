"""Image comparison metrics and step-size convergence studies.

PSNR compares 8-bit RGB channels (alpha ignored) and caps at 99 dB for
identical images. SSIM follows the standard single-scale formulation on
the Rec. 601 luma plane with an 11x11 Gaussian window, sigma 1.5, and the
usual stability constants, averaged over the valid (fully overlapped)
region.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionMismatch
from .render import Camera, ImageRGBA, RenderSettings, render

PSNR_CAP = 99.0
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def _as_rgb(image) -> np.ndarray:
    pixels = image.pixels if isinstance(image, ImageRGBA) else np.asarray(image)
    if pixels.ndim != 3 or pixels.shape[2] not in (3, 4):
        raise DimensionMismatch(f"expected (h, w, 3|4) image, got shape {pixels.shape}")
    return pixels[..., :3].astype(np.float64)


def _check_pair(a, b):
    ra, rb = _as_rgb(a), _as_rgb(b)
    if ra.shape != rb.shape:
        raise DimensionMismatch(f"image shapes differ: {ra.shape} vs {rb.shape}")
    return ra, rb


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over RGB; 99 dB when identical."""
    ra, rb = _check_pair(a, b)
    mse = float(np.mean((ra - rb) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(255.0**2 / mse))


def _luma(rgb: np.ndarray) -> np.ndarray:
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(w, w)
    return kernel / kernel.sum()


def ssim(a, b) -> float:
    """Mean structural similarity over the valid region of the luma plane."""
    ra, rb = _check_pair(a, b)
    x = _luma(ra)
    y = _luma(rb)
    win = _gaussian_window()
    if x.shape[0] < win.shape[0] or x.shape[1] < win.shape[1]:
        raise DimensionMismatch(
            f"images must be at least {win.shape[0]}x{win.shape[1]} for SSIM, got {x.shape}"
        )

    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    xx = convolve2d(x * x, win, mode="valid")
    yy = convolve2d(y * y, win, mode="valid")
    xy = convolve2d(x * y, win, mode="valid")
    var_x = xx - mu_x**2
    var_y = yy - mu_y**2
    cov = xy - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
    den = (mu_x**2 + mu_y**2 + _C1) * (var_x + var_y + _C2)
    return float(np.mean(num / den))


def convergence_study(
    target,
    camera: Camera,
    tf,
    settings: RenderSettings,
    steps,
) -> list[dict]:
    """PSNR/SSIM of renders at each step against a half-step reference.

    The reference uses half the smallest step in the list; all other
    settings are shared. Returns one record per step, largest first.
    """
    steps = sorted(float(s) for s in steps)
    if not steps:
        raise ValueError("steps must not be empty")
    ref_settings = RenderSettings(**{**settings.__dict__, "step": steps[0] / 2.0})
    reference = render(target, camera, tf, ref_settings)
    records = []
    for s in sorted(steps, reverse=True):
        image = render(target, camera, tf, RenderSettings(**{**settings.__dict__, "step": s}))
        records.append(
            {
                "step": s,
                "psnr_db": psnr(image, reference),
                "ssim": ssim(image, reference),
            }
        )
    return records
