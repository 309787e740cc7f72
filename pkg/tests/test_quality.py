"""PSNR, SSIM and the convergence study driver."""

import numpy as np
import pytest

import oracles
from conftest import centered_camera
from voxelray.errors import DimensionMismatch
from voxelray.quality import PSNR_CAP, convergence_study, psnr, ssim
from voxelray.render import RenderSettings
from voxelray.transfer import get_preset


def checker(h=32, w=32, lo=0, hi=255):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[::2, ::2] = hi
    img[1::2, 1::2] = hi
    img[img == 0] = lo
    return img


def test_identical_images_hit_the_cap():
    img = checker()
    assert psnr(img, img) == oracles.identical_image_psnr() == PSNR_CAP
    assert ssim(img, img) == pytest.approx(1.0)


def test_psnr_known_uniform_offset():
    # constant error of 5 grey levels: 20*log10(255/5) = 34.1514 dB
    a = np.full((16, 16, 3), 100, dtype=np.uint8)
    b = np.full((16, 16, 3), 105, dtype=np.uint8)
    assert psnr(a, b) == pytest.approx(20.0 * np.log10(255.0 / 5.0), abs=1e-9)


def test_psnr_ignores_alpha():
    a = np.zeros((8, 8, 4), dtype=np.uint8)
    b = a.copy()
    b[..., 3] = 200
    assert psnr(a, b) == PSNR_CAP


def test_psnr_orders_by_error():
    base = checker()
    near = base.astype(int).clip(0, 251).astype(np.uint8) + 2
    far = base.astype(int).clip(0, 215).astype(np.uint8) + 40
    assert psnr(base, near) > psnr(base, far)


def test_ssim_degrades_with_noise():
    rng = np.random.default_rng(11)
    base = (rng.uniform(40, 210, (48, 48, 3))).astype(np.uint8)
    noisy = np.clip(base + rng.normal(0, 12, base.shape), 0, 255).astype(np.uint8)
    noisier = np.clip(base + rng.normal(0, 45, base.shape), 0, 255).astype(np.uint8)
    s1, s2 = ssim(base, noisy), ssim(base, noisier)
    assert 0.0 < s2 < s1 < 1.0


def test_ssim_uniform_shift_scores_high():
    # a pure luminance shift barely touches structure
    a = checker(hi=200, lo=50)
    b = checker(hi=210, lo=60)
    assert ssim(a, b) > 0.98


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((8, 8, 3), dtype=np.uint8), np.zeros((8, 9, 3), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((8, 8), dtype=np.uint8), np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        ssim(np.zeros((4, 4, 3), dtype=np.uint8), np.zeros((4, 4, 3), dtype=np.uint8))


def test_convergence_records_largest_first(torso64):
    cam = centered_camera(torso64, size=48)
    steps = [1.0, 0.5, 2.0]
    records = convergence_study(torso64, cam, get_preset("bone"), RenderSettings(), steps)
    assert [r["step"] for r in records] == [2.0, 1.0, 0.5]
    assert all(set(r) == {"step", "psnr_db", "ssim"} for r in records)
    psnrs = [r["psnr_db"] for r in records]
    assert psnrs == sorted(psnrs)  # finer steps track the reference better


def test_convergence_rejects_empty(torso64):
    cam = centered_camera(torso64, size=16)
    with pytest.raises(ValueError):
        convergence_study(torso64, cam, get_preset("bone"), RenderSettings(), [])
