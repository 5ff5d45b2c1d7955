"""Fisheye camera model: sky rays (east, north, up) <-> image pixels.

The lens is described by a radial polynomial r(theta) giving the distance in
pixels from the principal point for a ray at zenith angle theta, valid on
[0, theta_max]. Orientation convention: the camera looks straight up
(camera axis = zenith) and image +x points east once ``north_offset_deg``
has been applied; north maps to -y (up in the image). An optional 2x2
affine [[c, d], [e, 1]] absorbs sensor skew.

Parameters are loaded from a JSON file produced by an external calibration
tool; nothing here estimates them.
"""

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidDirectionError, OutOfFieldError

_BISECT_TOL = 1e-9  # rad, polynomial inversion


@dataclass(frozen=True)
class FisheyeCamera:
    width: int
    height: int
    cx: float
    cy: float
    poly: tuple[float, ...]  # r(theta) coefficients, ascending degree, px
    theta_max: float  # rad
    affine_c: float = 1.0
    affine_d: float = 0.0
    affine_e: float = 0.0
    north_offset_deg: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.theta_max <= math.pi):
            raise ValueError(f"theta_max {self.theta_max} outside (0, pi]")
        if not (0 <= self.cx <= self.width - 1 and 0 <= self.cy <= self.height - 1):
            raise ValueError("principal point outside the image")
        if abs(self.radius_of(0.0)) > 1e-9:
            raise ValueError("radial polynomial must vanish at theta = 0")
        if abs(self.affine_c - self.affine_d * self.affine_e) < 1e-12:
            raise ValueError("degenerate affine skew matrix")
        # Strict monotonicity of r(theta) on [0, theta_max], checked on a grid.
        thetas = np.linspace(0.0, self.theta_max, 2048)
        radii = self._poly_eval(thetas)
        if np.any(np.diff(radii) <= 0.0):
            raise ValueError("r(theta) is not strictly increasing on [0, theta_max]")

    def _poly_eval(self, theta):
        r = np.zeros_like(np.asarray(theta, dtype=np.float64))
        for coeff in reversed(self.poly):
            r = r * theta + coeff
        return r

    def radius_of(self, theta: float) -> float:
        """r(theta) in pixels."""
        return float(self._poly_eval(theta))

    @property
    def max_radius(self) -> float:
        return self.radius_of(self.theta_max)

    def theta_of(self, radius: float) -> float:
        """Invert r(theta) by bisection; radius must be within the field."""
        if radius <= 0.0:
            return 0.0
        lo, hi = 0.0, self.theta_max
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.radius_of(mid) < radius:
                lo = mid
            else:
                hi = mid
            if hi - lo < _BISECT_TOL:
                break
        return 0.5 * (lo + hi)


def pixel_to_ray(cam: FisheyeCamera, p: tuple[float, float]) -> np.ndarray:
    """Unit (east, north, up) direction of the sky ray imaged at pixel p."""
    x, y = float(p[0]), float(p[1])
    if not (0 <= x <= cam.width - 1 and 0 <= y <= cam.height - 1):
        raise OutOfFieldError(f"pixel ({x}, {y}) outside the image")
    dx, dy = x - cam.cx, y - cam.cy
    det = cam.affine_c - cam.affine_d * cam.affine_e
    ix = (dx - cam.affine_d * dy) / det
    iy = (cam.affine_c * dy - cam.affine_e * dx) / det
    r = math.hypot(ix, iy)
    if r > cam.max_radius * (1.0 + 1e-12):
        raise OutOfFieldError(f"pixel ({x}, {y}) beyond theta_max field")
    theta = cam.theta_of(r)
    # psi: image azimuth (0 = up in the image), phi: compass azimuth.
    psi = math.atan2(ix, -iy)
    phi = psi + math.radians(cam.north_offset_deg)
    s = math.sin(theta)
    d = np.array([s * math.sin(phi), s * math.cos(phi), math.cos(theta)])
    return d / np.linalg.norm(d)


def ray_to_pixel(cam: FisheyeCamera, d) -> tuple[float, float] | None:
    """Pixel imaging unit direction d, or None when beyond theta_max."""
    d = np.asarray(d, dtype=np.float64)
    norm = float(np.linalg.norm(d))
    if abs(norm - 1.0) > 1e-6:
        raise InvalidDirectionError(f"direction norm {norm} deviates from 1")
    up = min(1.0, max(-1.0, float(d[2])))
    theta = math.acos(up)
    if theta > cam.theta_max + 1e-12:
        return None
    r = cam.radius_of(theta)
    phi = math.atan2(float(d[0]), float(d[1]))
    psi = phi - math.radians(cam.north_offset_deg)
    ix = r * math.sin(psi)
    iy = -r * math.cos(psi)
    px = cam.affine_c * ix + cam.affine_d * iy + cam.cx
    py = cam.affine_e * ix + iy + cam.cy
    return (px, py)


def load_camera(path, default_north_offset_deg: float | None = None) -> FisheyeCamera:
    """Read camera parameters from a JSON file.

    Keys: image_width, image_height, cx, cy, poly_coeffs (ascending degree),
    theta_max_rad, affine_c/d/e (optional), north_offset_deg (optional).
    ``default_north_offset_deg`` applies only when the file omits the key.
    """
    doc = json.loads(Path(path).read_text())
    offset = doc.get("north_offset_deg")
    if offset is None:
        offset = default_north_offset_deg if default_north_offset_deg is not None else 0.0
    return FisheyeCamera(
        width=int(doc["image_width"]),
        height=int(doc["image_height"]),
        cx=float(doc["cx"]),
        cy=float(doc["cy"]),
        poly=tuple(float(c) for c in doc["poly_coeffs"]),
        theta_max=float(doc["theta_max_rad"]),
        affine_c=float(doc.get("affine_c", 1.0)),
        affine_d=float(doc.get("affine_d", 0.0)),
        affine_e=float(doc.get("affine_e", 0.0)),
        north_offset_deg=float(offset),
    )


def save_camera(cam: FisheyeCamera, path) -> None:
    doc = {
        "image_width": cam.width,
        "image_height": cam.height,
        "cx": cam.cx,
        "cy": cam.cy,
        "poly_coeffs": list(cam.poly),
        "theta_max_rad": cam.theta_max,
        "affine_c": cam.affine_c,
        "affine_d": cam.affine_d,
        "affine_e": cam.affine_e,
        "north_offset_deg": cam.north_offset_deg,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def with_north_offset(cam: FisheyeCamera, north_offset_deg: float) -> FisheyeCamera:
    return replace(cam, north_offset_deg=north_offset_deg)
