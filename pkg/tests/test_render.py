"""Ray generation, compositing, shading and full renders."""

import math

import numpy as np
import pytest

from conftest import centered_camera
from voxelray.errors import InvalidSettings, IsovalueOutOfRange
from voxelray.phantoms import generate_phantom
from voxelray.render import (
    Camera,
    RenderSettings,
    camera_from_dict,
    composite_step,
    generate_ray,
    render,
    settings_from_dict,
    shade_headlight,
)
from voxelray.transfer import get_preset, transfer_from_points


@pytest.fixture(scope="module")
def sphere96():
    return generate_phantom("sphere", (96, 96, 96))


def red_tf():
    return transfer_from_points(
        [(-1000.0, 1, 0, 0, 1.0), (3000.0, 1, 0, 0, 1.0)], domain=(-1000.0, 3000.0)
    )


def clear_tf():
    return transfer_from_points(
        [(-2000.0, 0, 0, 0, 0.0), (2000.0, 0, 0, 0, 0.0)]
    )


# ---------------------------------------------------------------- rays


def test_center_pixel_ray_hits_look_at():
    cam = Camera(position=(10.0, 3.0, -2.0), look_at=(1.0, 2.0, 5.0), width=97, height=97)
    origin, direction = generate_ray(cam, (48, 48))
    fwd = np.subtract(cam.look_at, cam.position)
    fwd = fwd / np.linalg.norm(fwd)
    assert np.allclose(origin, cam.position)
    assert np.allclose(direction, fwd, atol=1e-6)


def test_rays_are_unit_and_start_at_camera():
    cam = Camera(position=(5.0, 5.0, 80.0), look_at=(5.0, 5.0, 0.0), up=(0, 1, 0), width=32, height=24)
    for pixel in [(0, 0), (31, 23), (16, 12), (7, 20)]:
        origin, direction = generate_ray(cam, pixel)
        assert np.allclose(origin, cam.position)
        assert abs(np.linalg.norm(direction) - 1.0) < 1e-9


def test_vertical_subtense_matches_fov():
    # rays pass through pixel centres, so the top and bottom rows sit half a
    # pixel inside the frustum edges: subtense = 2*atan(tan(fov/2)*(1 - 1/h))
    h = 401
    cam = Camera(position=(0.0, 0.0, 0.0), look_at=(0.0, 0.0, -50.0), up=(0, 1, 0),
                 vertical_fov_deg=40.0, width=401, height=h)
    _, top = generate_ray(cam, (200, 0))
    _, bottom = generate_ray(cam, (200, h - 1))
    angle = math.acos(float(np.clip(top @ bottom, -1.0, 1.0)))
    expected = 2.0 * math.atan(math.tan(math.radians(40.0) / 2.0) * (1.0 - 1.0 / h))
    assert abs(angle - expected) < 1e-9


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(position=(0, 0, 0), look_at=(0, 0, 0))
    with pytest.raises(ValueError):
        Camera(position=(0, 0, 0), look_at=(0, 0, 1), up=(0, 0, 2))
    with pytest.raises(ValueError):
        Camera(position=(0, 0, 0), look_at=(1, 0, 0), vertical_fov_deg=180.0)
    with pytest.raises(ValueError):
        Camera(position=(0, 0, 0), look_at=(1, 0, 0), width=0)


def test_camera_dict_round_trip():
    cam = Camera(position=(1, 2, 3), look_at=(4, 5, 6), up=(0, 1, 0),
                 vertical_fov_deg=25.0, width=10, height=20)
    again = camera_from_dict(cam.to_dict())
    assert tuple(again.position) == (1, 2, 3)
    assert again.vertical_fov_deg == 25.0
    assert (again.width, again.height) == (10, 20)


# ---------------------------------------------------------- compositing


def test_composite_opaque_first_sample_wins():
    out = composite_step((0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 1.0), 0.5, 0.5)
    assert out == (1.0, 0.0, 0.0, 1.0)


def test_composite_transparent_sample_is_identity():
    dst = (0.3, 0.2, 0.1, 0.6)
    assert composite_step(dst, (1.0, 1.0, 1.0, 0.0), 0.5, 0.5) == dst


def test_composite_two_layer_hand_value():
    # half-opaque red then solid blue: 0.5 red + 0.5 blue, fully opaque
    d = composite_step((0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.5), 1.0, 1.0)
    d = composite_step(d, (0.0, 0.0, 1.0, 1.0), 1.0, 1.0)
    assert np.allclose(d, (0.5, 0.0, 0.5, 1.0))


def test_composite_opacity_step_correction():
    # doubling the step squares the transparency: 1-(1-0.75)^2 = 0.9375
    out = composite_step((0.0, 0.0, 0.0, 0.0), (1.0, 1.0, 1.0, 0.75), 1.0, 0.5)
    assert math.isclose(out[3], 0.9375)
    half = composite_step((0.0, 0.0, 0.0, 0.0), (1.0, 1.0, 1.0, 0.75), 0.25, 0.5)
    assert math.isclose(half[3], 1.0 - 0.25 ** 0.5)


# -------------------------------------------------------------- shading


def test_shade_facing_surface():
    # normal straight at the camera: full diffuse plus full specular
    rgb = shade_headlight((0.5, 0.25, 0.0), grad=(4.0, 0.0, 0.0), view_dir=(1.0, 0.0, 0.0))
    assert np.allclose(rgb, (0.5 * 0.8 + 0.2, 0.25 * 0.8 + 0.2, 0.2))


def test_shade_grazing_surface_keeps_ambient_only():
    rgb = shade_headlight((0.6, 0.6, 0.6), grad=(0.0, 2.0, 0.0), view_dir=(1.0, 0.0, 0.0))
    assert np.allclose(rgb, (0.06, 0.06, 0.06))


def test_shade_zero_gradient_passthrough():
    assert shade_headlight((0.4, 0.5, 0.6), grad=(0.0, 0.0, 0.0), view_dir=(1, 0, 0)) == (0.4, 0.5, 0.6)


def test_shade_backface_specular_survives():
    # with a headlight the reflection term is even in n.l, so a surface
    # facing away still gets the full highlight while diffuse drops to zero
    rgb = shade_headlight((1.0, 0.0, 0.0), grad=(-3.0, 0.0, 0.0), view_dir=(1.0, 0.0, 0.0))
    assert np.allclose(rgb, (0.1 + 0.2, 0.2, 0.2))


def test_shade_clamps_to_unit():
    rgb = shade_headlight((1.0, 1.0, 1.0), grad=(9.0, 0.0, 0.0), view_dir=(1.0, 0.0, 0.0))
    assert rgb == (1.0, 1.0, 1.0)


# ------------------------------------------------------------- settings


def test_settings_validation():
    with pytest.raises(InvalidSettings):
        RenderSettings(step=0.0).validate()
    with pytest.raises(InvalidSettings):
        RenderSettings(interpolation="nearest").validate()
    with pytest.raises(InvalidSettings):
        RenderSettings(classification="mid").validate()
    with pytest.raises(InvalidSettings):
        RenderSettings(mode="mip").validate()
    with pytest.raises(InvalidSettings):
        RenderSettings(mode="isosurface").validate()  # needs an isovalue
    with pytest.raises(InvalidSettings):
        RenderSettings(early_termination_alpha=0.0).validate()
    with pytest.raises(InvalidSettings):
        RenderSettings(background=(2.0, 0.0, 0.0, 1.0)).validate()
    RenderSettings(mode="isosurface", isovalue=100.0).validate()


def test_settings_dict_round_trip_and_unknown_keys():
    s = RenderSettings(step=0.25, classification="preintegrated", use_blocks=True)
    again = settings_from_dict(s.to_dict())
    assert again.step == 0.25
    assert again.classification == "preintegrated"
    with pytest.raises(InvalidSettings):
        settings_from_dict({"stepp": 1.0})


def test_isovalue_out_of_range(sphere48):
    cam = centered_camera(sphere48, size=16)
    with pytest.raises(IsovalueOutOfRange):
        render(sphere48, cam, get_preset("grayscale"),
               RenderSettings(mode="isosurface", isovalue=99999.0))


# -------------------------------------------------------------- renders


def test_transparent_tf_yields_background_and_no_work(torso64):
    cam = centered_camera(torso64, size=32)
    settings = RenderSettings(use_blocks=True, background=(0.2, 0.4, 0.6, 1.0))
    img = render(torso64, cam, clear_tf(), settings)
    assert np.all(img.pixels[..., 0] == 51)
    assert np.all(img.pixels[..., 1] == 102)
    assert np.all(img.pixels[..., 2] == 153)
    assert np.all(img.pixels[..., 3] == 255)
    assert img.stats.blocks_visited == 0
    assert img.stats.samples_taken == 0


def test_rays_missing_volume_see_background(torso64):
    cam = Camera(position=(300.0, 32.0, 32.0), look_at=(600.0, 32.0, 32.0),
                 width=8, height=8)
    img = render(torso64, cam, get_preset("bone"), RenderSettings())
    assert np.all(img.pixels[..., :3] == 0)
    assert img.stats.samples_taken == 0


def test_block_render_matches_monolithic(torso64):
    cam = centered_camera(torso64)
    tf = get_preset("bone")
    for interp, tol in (("trilinear", 1), ("tricubic", 2)):
        mono = render(torso64, cam, tf, RenderSettings(interpolation=interp))
        block = render(torso64, cam, tf,
                       RenderSettings(interpolation=interp, use_blocks=True,
                                      block_size=16, overlap=3))
        diff = np.abs(mono.pixels.astype(int) - block.pixels.astype(int)).max()
        assert diff <= tol
        assert block.stats.blocks_empty > 0  # culling actually engaged


def test_early_termination_within_quantisation(sphere48, shell48):
    tf = get_preset("soft-tissue")
    for vol in (sphere48, shell48):
        cam = centered_camera(vol, size=48)
        on = render(vol, cam, tf, RenderSettings(early_termination_alpha=0.99))
        off = render(vol, cam, tf, RenderSettings(early_termination_alpha=1.0))
        diff = np.abs(on.pixels.astype(int) - off.pixels.astype(int)).max()
        assert diff <= 3
        assert on.stats.samples_taken < off.stats.samples_taken


def test_iso_depth_matches_analytic_radius(sphere96):
    # value ramps from +peak at the centre to -1000 outward, hitting zero at
    # half the phantom radius: r = 24 of a 96 cube, so the centre ray from
    # x=300 first crosses at x=72, a distance of 228 mm
    cam = Camera(position=(300.0, 48.0, 48.0), look_at=(48.0, 48.0, 48.0),
                 width=97, height=97)
    step = 0.5
    img = render(sphere96, cam, red_tf(),
                 RenderSettings(mode="isosurface", isovalue=0.0, step=step))
    assert abs(img.depth[48, 48] - 228.0) <= step / 2.0
    assert np.isnan(img.depth[0, 0])  # corner ray misses the surface
    # head-on hit: base red shaded by (ka + kd) plus the full highlight
    assert tuple(img.pixels[48, 48]) == (255, 51, 51, 255)


def test_iso_depth_only_for_isosurface(sphere48):
    cam = centered_camera(sphere48, size=16)
    img = render(sphere48, cam, get_preset("grayscale"), RenderSettings())
    assert img.depth is None


def test_render_deterministic(torso64):
    cam = centered_camera(torso64, size=48)
    tf = get_preset("bone")
    settings = RenderSettings(classification="preintegrated", use_blocks=True)
    a = render(torso64, cam, tf, settings)
    b = render(torso64, cam, tf, settings)
    assert np.array_equal(a.pixels, b.pixels)


def test_stats_shape(torso64):
    cam = centered_camera(torso64, size=24)
    img = render(torso64, cam, get_preset("bone"), RenderSettings())
    s = img.stats
    assert s.rays == 24 * 24
    assert s.samples_taken > 0
    assert s.blocks_total == 1 and s.blocks_empty == 0
    assert s.wall_time_s >= 0.0
    d = s.to_dict()
    assert d["rays"] == 576
