"""Sun-anchored prediction zone, occlusion extrapolation, irradiance forecast.

The zone is a band that starts at the sun pixel and extends against the
global cloud motion: clouds that will occlude the sun within the horizon
are the ones currently sitting upstream. The cloud field is treated as
frozen and rigidly advected by the global motion vector, so the occlusion
expected after k steps is the mean cloud probability over the band slice at
distance speed * k steps from the sun.
"""

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import NoSunError, ShapeError
from .flow import GlobalMotion
from .raster import Raster, bilinear_sample

MIN_ZONE_SPEED = 0.05  # px/frame below which the cloud field is "static"
DEFAULT_ALPHA = 0.75  # occlusion -> attenuation coupling
DEFAULT_STEP_SECONDS = 30.0
DEFAULT_ZONE_WIDTH_FRACTION = 0.15


@dataclass(frozen=True)
class PredictionZone:
    origin: tuple[float, float]  # sun pixel
    axis: tuple[float, float]  # unit vector, opposite the global motion
    length: float  # px
    width: float  # px
    degenerate: bool = False  # static-cloud case: disc of radius width/2

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError("width must be positive")
        if self.length < 0.0:
            raise ValueError("length must be non-negative")
        if not self.degenerate:
            n = math.hypot(*self.axis)
            if self.length > 0.0 and abs(n - 1.0) > 1e-9:
                raise ValueError("axis must be unit-norm")


@dataclass(frozen=True)
class OcclusionProfile:
    occlusion: tuple[float, ...]  # per-step mean cloud probability
    confidence: tuple[float, ...]  # per-step in-image fraction * motion confidence

    def __post_init__(self):
        if len(self.occlusion) != len(self.confidence):
            raise ShapeError("occlusion/confidence lengths differ")
        for seq in (self.occlusion, self.confidence):
            if any(not (0.0 <= x <= 1.0) for x in seq):
                raise ValueError("profile values must lie in [0, 1]")

    @property
    def steps(self) -> int:
        return len(self.occlusion)


class IrradianceSeries:
    """Uniformly spaced, timestamped irradiance values (W/m^2)."""

    __slots__ = ("timestamps", "values")

    def __init__(self, timestamps, values):
        timestamps = tuple(timestamps)
        values = np.array(values, dtype=np.float64)
        if len(timestamps) != values.size or values.size == 0:
            raise ShapeError("timestamps and values must be equal-length, non-empty")
        if values.min() < 0.0:
            raise ValueError("irradiance values must be non-negative")
        if len(timestamps) > 1:
            gaps = [
                (timestamps[i + 1] - timestamps[i]).total_seconds()
                for i in range(len(timestamps) - 1)
            ]
            if min(gaps) <= 0.0:
                raise ValueError("timestamps must be strictly increasing")
            if max(gaps) - min(gaps) > 1e-6:
                raise ValueError("timestamps must be uniformly spaced")
        values.setflags(write=False)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("IrradianceSeries is immutable")

    def __len__(self):
        return len(self.timestamps)


def build_prediction_zone(
    sun_px: tuple[float, float] | None,
    gm: GlobalMotion,
    horizon_s: float,
    frame_dt_s: float,
    width_px: float,
) -> PredictionZone:
    """Zone geometry for a horizon; degenerates to a disc for static clouds."""
    if sun_px is None:
        raise NoSunError("sun is below the horizon; no prediction zone")
    if frame_dt_s <= 0.0:
        raise ValueError("frame_dt_s must be positive")
    speed = gm.speed
    if speed < MIN_ZONE_SPEED:
        return PredictionZone(
            origin=tuple(sun_px), axis=(0.0, 0.0), length=0.0,
            width=width_px, degenerate=True,
        )
    length = speed * (horizon_s / frame_dt_s)
    axis = (-gm.vx / speed, -gm.vy / speed)
    return PredictionZone(origin=tuple(sun_px), axis=axis, length=length, width=width_px)


def occlusion_profile(
    prob: Raster,
    zone: PredictionZone,
    gm: GlobalMotion,
    steps: int,
) -> OcclusionProfile:
    """Per-step occlusion by advecting the frozen cloud field along the zone.

    Step k (1-based) reads the band slice centered at distance k * length /
    steps from the sun; the degenerate disc zone reads the disc mean at every
    step. Confidence is the in-image fraction of the slice scaled by the
    global-motion confidence.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    plane = prob.data if prob.channels == 1 else prob.gray()
    h, w = plane.shape
    ox, oy = zone.origin

    if zone.degenerate:
        occ, conf = _disc_mean(plane, ox, oy, zone.width / 2.0)
        return OcclusionProfile(
            occlusion=(occ,) * steps,
            confidence=(conf * gm.confidence,) * steps,
        )

    ax, ay = zone.axis
    px, py = -ay, ax  # unit perpendicular
    thickness = max(zone.length / steps, 1.0)
    n_along = max(2, int(round(thickness)) + 1)
    n_across = max(2, int(round(zone.width)) + 1)
    t_off = np.linspace(-zone.width / 2.0, zone.width / 2.0, n_across)
    s_off = np.linspace(-thickness / 2.0, thickness / 2.0, n_along)
    ss, tt = np.meshgrid(s_off, t_off)

    occlusion, confidence = [], []
    for k in range(1, steps + 1):
        center = k * zone.length / steps
        xs = ox + (center + ss) * ax + tt * px
        ys = oy + (center + ss) * ay + tt * py
        inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
        frac = float(inside.mean())
        if frac == 0.0:
            occlusion.append(0.0)
            confidence.append(0.0)
            continue
        vals = bilinear_sample(plane, xs[inside], ys[inside])
        occlusion.append(float(np.clip(vals.mean(), 0.0, 1.0)))
        confidence.append(frac * gm.confidence)
    return OcclusionProfile(tuple(occlusion), tuple(confidence))


def _disc_mean(plane: np.ndarray, cx: float, cy: float, radius: float):
    h, w = plane.shape
    n = max(3, int(round(2.0 * radius)) + 1)
    off = np.linspace(-radius, radius, n)
    xx, yy = np.meshgrid(cx + off, cy + off)
    in_disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
    inside = in_disc & (xx >= 0) & (xx <= w - 1) & (yy >= 0) & (yy <= h - 1)
    if not inside.any():
        return 0.0, 0.0
    vals = bilinear_sample(plane, xx[inside], yy[inside])
    frac = float(inside.sum() / max(in_disc.sum(), 1))
    return float(np.clip(vals.mean(), 0.0, 1.0)), min(1.0, frac)


def forecast_irradiance(
    profile: OcclusionProfile,
    clearsky_wm2,
    alpha: float = DEFAULT_ALPHA,
    start: datetime | None = None,
    step_seconds: float = DEFAULT_STEP_SECONDS,
) -> IrradianceSeries:
    """I(k) = clearsky(k) * (1 - alpha * occlusion(k)) over the horizon steps.

    Timestamps run start + k * step_seconds for k = 1..steps; start defaults
    to the epoch for callers that only care about the values.
    """
    cs = np.asarray(clearsky_wm2, dtype=np.float64)
    if cs.size != profile.steps:
        raise ShapeError(
            f"clear-sky series has {cs.size} steps, profile has {profile.steps}"
        )
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    if start is None:
        start = datetime(1970, 1, 1)
    values = cs * (1.0 - alpha * np.asarray(profile.occlusion))
    stamps = [start + timedelta(seconds=step_seconds * k) for k in range(1, profile.steps + 1)]
    return IrradianceSeries(stamps, np.maximum(values, 0.0))
