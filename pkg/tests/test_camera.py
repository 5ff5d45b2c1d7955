import math

import numpy as np
import pytest

from bogwatch.camera import (
    FisheyeCamera,
    load_camera,
    pixel_to_ray,
    ray_to_pixel,
    save_camera,
)
from bogwatch.errors import InvalidDirectionError, OutOfFieldError


@pytest.fixture
def equidistant():
    # r(theta) = 200 * theta, 0.9 rad field
    return FisheyeCamera(width=400, height=400, cx=200.0, cy=200.0,
                         poly=(0.0, 200.0), theta_max=0.9)


class TestPixelToRay:
    def test_principal_point_is_zenith(self, equidistant):
        d = pixel_to_ray(equidistant, (200.0, 200.0))
        assert np.allclose(d, [0.0, 0.0, 1.0], atol=1e-12)

    def test_equidistant_closed_form(self, equidistant):
        # 100 px right of center: zenith angle 100/200 = 0.5 rad, azimuth east.
        d = pixel_to_ray(equidistant, (300.0, 200.0))
        assert abs(math.acos(d[2]) - 0.5) < 1e-7
        assert abs(math.atan2(d[0], d[1]) - math.pi / 2) < 1e-9

    def test_roundtrip_100_random_pixels(self, equidistant):
        rng = np.random.default_rng(42)
        for _ in range(100):
            ang = rng.uniform(0.0, 2.0 * np.pi)
            r = rng.uniform(0.0, equidistant.max_radius * 0.999)
            p = (200.0 + r * np.cos(ang), 200.0 + r * np.sin(ang))
            q = ray_to_pixel(equidistant, pixel_to_ray(equidistant, p))
            assert abs(q[0] - p[0]) < 1e-6 and abs(q[1] - p[1]) < 1e-6

    def test_outside_image_raises(self, equidistant):
        with pytest.raises(OutOfFieldError):
            pixel_to_ray(equidistant, (-1.0, 50.0))

    def test_beyond_theta_max_raises(self, equidistant):
        # max radius is 180 px; the corner is farther out.
        with pytest.raises(OutOfFieldError):
            pixel_to_ray(equidistant, (399.0, 399.0))

    def test_up_component_bounded(self, equidistant):
        d = pixel_to_ray(equidistant, (200.0 + equidistant.max_radius - 1e-6, 200.0))
        assert d[2] >= math.cos(equidistant.theta_max) - 1e-9


class TestRayToPixel:
    def test_zenith_maps_to_principal_point(self, equidistant):
        assert np.allclose(ray_to_pixel(equidistant, (0.0, 0.0, 1.0)), (200.0, 200.0))

    def test_beyond_field_marker(self, equidistant):
        # zenith angle 1.2 rad > theta_max 0.9
        d = (math.sin(1.2), 0.0, math.cos(1.2))
        assert ray_to_pixel(equidistant, d) is None

    def test_north_is_up(self, equidistant):
        # zenith 0.25 rad toward north -> 50 px above center
        d = (0.0, math.sin(0.25), math.cos(0.25))
        p = ray_to_pixel(equidistant, d)
        assert abs(p[0] - 200.0) < 1e-9 and abs(p[1] - 150.0) < 1e-9

    def test_non_unit_raises(self, equidistant):
        with pytest.raises(InvalidDirectionError):
            ray_to_pixel(equidistant, (0.0, 0.0, 1.01))


class TestValidation:
    def test_decreasing_polynomial_rejected(self):
        with pytest.raises(ValueError):
            FisheyeCamera(width=100, height=100, cx=50, cy=50,
                          poly=(0.0, 100.0, -200.0), theta_max=1.0)

    def test_principal_point_outside_rejected(self):
        with pytest.raises(ValueError):
            FisheyeCamera(width=100, height=100, cx=150, cy=50,
                          poly=(0.0, 50.0), theta_max=1.0)

    def test_nonzero_constant_term_rejected(self):
        with pytest.raises(ValueError):
            FisheyeCamera(width=100, height=100, cx=50, cy=50,
                          poly=(5.0, 50.0), theta_max=1.0)


class TestAffineAndOffset:
    def test_affine_roundtrip(self):
        cam = FisheyeCamera(width=400, height=400, cx=201.0, cy=198.5,
                            poly=(0.0, 190.0, 12.0), theta_max=0.85,
                            affine_c=1.002, affine_d=0.0013, affine_e=-0.0009)
        rng = np.random.default_rng(11)
        for _ in range(50):
            ang = rng.uniform(0.0, 2.0 * np.pi)
            r = rng.uniform(0.0, cam.max_radius * 0.98)
            p = (cam.cx + r * np.cos(ang), cam.cy + r * np.sin(ang))
            q = ray_to_pixel(cam, pixel_to_ray(cam, p))
            assert abs(q[0] - p[0]) < 1e-6 and abs(q[1] - p[1]) < 1e-6

    def test_north_offset_rotates_azimuth(self):
        cam = FisheyeCamera(width=400, height=400, cx=200, cy=200,
                            poly=(0.0, 200.0), theta_max=0.9,
                            north_offset_deg=90.0)
        # With north offset 90, a ray toward east appears "up" in the image.
        d = (math.sin(0.25), 0.0, math.cos(0.25))
        p = ray_to_pixel(cam, d)
        assert abs(p[0] - 200.0) < 1e-9 and abs(p[1] - 150.0) < 1e-9


def test_camera_file_roundtrip(tmp_path, equidistant):
    path = tmp_path / "cam.json"
    save_camera(equidistant, path)
    cam2 = load_camera(path)
    assert cam2 == equidistant
    # default north offset applies only when the file omits the key
    trimmed = path.read_text().replace('"north_offset_deg": 0.0,', "")
    path2 = tmp_path / "cam2.json"
    path2.write_text(trimmed)
    cam3 = load_camera(path2, default_north_offset_deg=17.0)
    assert cam3.north_offset_deg == 17.0
