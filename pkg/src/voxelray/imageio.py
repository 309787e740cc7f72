"""PNG and PPM encoding for rendered images."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .render import ImageRGBA


def encode_png(image: ImageRGBA | np.ndarray) -> bytes:
    """Lossless RGBA PNG bytes."""
    pixels = image.pixels if isinstance(image, ImageRGBA) else np.asarray(image)
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def save_png(image: ImageRGBA | np.ndarray, path) -> None:
    Path(path).write_bytes(encode_png(image))


def encode_png_gray(pixels: np.ndarray) -> bytes:
    """Single-channel uint8 PNG bytes."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def encode_ppm(image: ImageRGBA | np.ndarray) -> bytes:
    """Binary P6 PPM; alpha is dropped."""
    pixels = image.pixels if isinstance(image, ImageRGBA) else np.asarray(image)
    h, w = pixels.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(pixels[..., :3]).tobytes()


def save_ppm(image: ImageRGBA | np.ndarray, path) -> None:
    Path(path).write_bytes(encode_ppm(image))


def load_image(path) -> np.ndarray:
    """Read an image file as uint8 RGBA."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGBA"))


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGBA"))
