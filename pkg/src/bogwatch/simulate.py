"""Synthetic sky, field, and weather scenes with exact ground truth.

The sky simulator renders cloud discs rigidly advecting over a fisheye sky
gradient and computes the exact irradiance from scene geometry (circle
overlap of each cloud with the sun disc, attenuated by the same alpha the
forecaster uses).

Two rendering choices keep the ground truth exact end to end:

* The cloud/sky blend per pixel is solved so that the color-based cloud
  probability of the rendered color equals the cloud's nominal opacity, so
  a perfect forecast reads exactly the scene's occlusion.
* Cloud texture (needed by the flow estimator) is injected only into the
  green channel, which the blue/red ratio ignores but luma-driven optical
  flow sees.
"""

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .camera import FisheyeCamera
from .clouds import DEFAULT_STEEPNESS, DEFAULT_THRESHOLD, RATIO_EPS
from .forecast import IrradianceSeries
from .raster import Raster
from .solar import ClearSkyModel, SunPosition, sun_pixel
from .weather import WeatherRecord

SKY_ZENITH = (0.32, 0.50, 0.92)
SKY_HORIZON = (0.55, 0.72, 0.95)
CLOUD_COLOR = (0.90, 0.86, 0.80)  # warm gray: reachable probabilities near 1
VOID_COLOR = (0.02, 0.03, 0.10)  # outside the fisheye field; reads as sky


@dataclass(frozen=True)
class CloudDisc:
    x0: float
    y0: float
    radius: float
    vx: float  # px per frame
    vy: float
    opacity: float
    appear_s: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.opacity <= 1.0):
            raise ValueError("opacity must lie in [0, 1]")
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")

    def center_at(self, time_s: float, frame_dt_s: float):
        steps = time_s / frame_dt_s
        return self.x0 + self.vx * steps, self.y0 + self.vy * steps


@dataclass(frozen=True)
class BerryField:
    n_tiles: int = 100
    tile_px: int = 128
    tile_spacing_m: float = 10.0
    radius_range: tuple[float, float] = (6.0, 10.0)
    singles_range: tuple[int, int] = (3, 7)
    pair_fraction: float = 0.35  # tiles that get one overlapping pair
    pair_overlap: float = 0.4  # pair separation = (2 - overlap) * radius


@dataclass(frozen=True)
class WeatherCoeffs:
    base_temp_f: float = 45.0
    irradiance: float = 0.03  # degF per W/m^2
    humidity: float = -0.08  # degF per %
    dew_point: float = 0.15  # degF per degF
    noise_f: float = 1.0


@dataclass(frozen=True)
class SimScenario:
    name: str = "scenario"
    seed: int = 0
    size: int = 256
    frame_dt_s: float = 5.0
    start_time: datetime = datetime(2021, 7, 10, 15, 0, tzinfo=timezone.utc)
    sun_azimuth_deg: float = 180.0
    sun_elevation_deg: float = 45.0
    clouds: tuple[CloudDisc, ...] = ()
    alpha: float = 0.75
    sun_disc_radius_px: float = 6.0
    texture_amp: float = 0.16
    clear_sky: ClearSkyModel = field(default_factory=ClearSkyModel)
    berry_field: BerryField = field(default_factory=BerryField)
    weather: WeatherCoeffs = field(default_factory=WeatherCoeffs)


def sim_camera(sc: SimScenario) -> FisheyeCamera:
    """Equidistant fisheye filling the frame to theta_max = 1.45 rad."""
    half = sc.size / 2.0
    theta_max = 1.45
    return FisheyeCamera(
        width=sc.size, height=sc.size, cx=half - 0.5, cy=half - 0.5,
        poly=(0.0, (half - 2.0) / theta_max), theta_max=theta_max,
    )


def scenario_sun(sc: SimScenario, time_s: float = 0.0) -> SunPosition:
    return SunPosition(
        azimuth_deg=sc.sun_azimuth_deg,
        elevation_deg=sc.sun_elevation_deg,
        timestamp=sc.start_time + timedelta(seconds=time_s),
    )


def scenario_sun_pixel(sc: SimScenario) -> tuple[float, float]:
    px = sun_pixel(sim_camera(sc), scenario_sun(sc))
    if px is None:
        raise ValueError(f"scenario {sc.name}: sun outside the camera field")
    return px


def _calibrated_blend(sky_r, sky_b, opacity: float):
    """Blend fraction toward CLOUD_COLOR so the rendered pixel's cloud
    probability equals the requested opacity."""
    p = min(max(opacity, 2e-3), 0.995)
    rho = DEFAULT_THRESHOLD - math.log(p / (1.0 - p)) / DEFAULT_STEEPNESS
    dr = CLOUD_COLOR[0] - sky_r
    db = CLOUD_COLOR[2] - sky_b
    num = rho * (sky_b + sky_r + RATIO_EPS) - (sky_b - sky_r)
    den = (db - dr) - rho * (db + dr)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = num / den
    return np.clip(b, 0.0, 1.0)


def _cloud_texture(sc: SimScenario, idx: int):
    rng = np.random.default_rng([sc.seed, 7, idx])
    n = 8
    k = rng.uniform(2.0 * np.pi / 36.0, 2.0 * np.pi / 14.0, n)
    ang = rng.uniform(0.0, 2.0 * np.pi, n)
    return k * np.cos(ang), k * np.sin(ang), rng.uniform(0.0, 2.0 * np.pi, n)


def render_frame(sc: SimScenario, time_s: float) -> Raster:
    size = sc.size
    half = size / 2.0
    ys, xs = np.mgrid[0.0:size, 0.0:size]
    r = np.hypot(xs - (half - 0.5), ys - (half - 0.5))
    field_r = half - 2.0
    in_field = r <= field_r

    # Sky gradient, zenith to horizon.
    t = np.clip(r / field_r, 0.0, 1.0)[:, :, None]
    sky = (1.0 - t) * np.array(SKY_ZENITH) + t * np.array(SKY_HORIZON)
    img = np.where(in_field[:, :, None], sky, np.array(VOID_COLOR))

    for idx, cloud in enumerate(sc.clouds):
        if time_s < cloud.appear_s:
            continue
        cx, cy = cloud.center_at(time_s, sc.frame_dt_s)
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= cloud.radius**2
        inside &= in_field
        if not inside.any():
            continue
        blend = _calibrated_blend(img[:, :, 0][inside], img[:, :, 2][inside],
                                  cloud.opacity)
        kxs, kys, phases = _cloud_texture(sc, idx)
        tex = np.zeros(int(inside.sum()))
        px = xs[inside] - cx
        py = ys[inside] - cy
        for i in range(len(phases)):
            tex += np.sin(kxs[i] * px + kys[i] * py + phases[i])
        tex /= math.sqrt(len(phases) / 2.0)  # unit-variance texture
        for c in range(3):
            chan = img[:, :, c]
            vals = chan[inside] + blend * (CLOUD_COLOR[c] - chan[inside])
            if c == 1:
                vals = vals + sc.texture_amp * tex
            chan[inside] = vals
    return Raster(np.clip(img, 0.0, 1.0))


def _circle_overlap(d: float, r1: float, r2: float) -> float:
    """Intersection area of two circles with center distance d."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        rm = min(r1, r2)
        return math.pi * rm * rm
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
    tri = 0.5 * math.sqrt(
        (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    )
    return a1 + a2 - tri


def exact_occlusion(sc: SimScenario, time_s: float) -> float:
    """Opacity-weighted fraction of the sun disc covered at a scene time.

    Contributions add (clipped at 1), which is exact as long as two clouds
    do not cover the sun simultaneously; the bundled scenarios are built
    that way.
    """
    sx, sy = scenario_sun_pixel(sc)
    sun_area = math.pi * sc.sun_disc_radius_px**2
    total = 0.0
    for cloud in sc.clouds:
        if time_s < cloud.appear_s:
            continue
        cx, cy = cloud.center_at(time_s, sc.frame_dt_s)
        overlap = _circle_overlap(
            math.hypot(cx - sx, cy - sy), sc.sun_disc_radius_px, cloud.radius
        )
        total += cloud.opacity * overlap / sun_area
    return min(total, 1.0)


def exact_irradiance(sc: SimScenario, times_s) -> np.ndarray:
    cs = sc.clear_sky.irradiance(sc.sun_elevation_deg)
    return np.array(
        [cs * (1.0 - sc.alpha * exact_occlusion(sc, t)) for t in times_s]
    )


def simulate_sky(sc: SimScenario, frames: int, dt_s: float | None = None):
    """Render a frame sequence plus the exact irradiance at the frame times."""
    if frames < 2:
        raise ValueError("need at least 2 frames")
    dt = sc.frame_dt_s if dt_s is None else dt_s
    if dt_s is not None and dt_s != sc.frame_dt_s:
        sc = replace(sc, frame_dt_s=dt_s)
    times = [i * dt for i in range(frames)]
    rasters = [render_frame(sc, t) for t in times]
    stamps = [sc.start_time + timedelta(seconds=t) for t in times]
    series = IrradianceSeries(stamps, exact_irradiance(sc, times))
    return rasters, series


@dataclass(frozen=True)
class FieldTile:
    name: str
    mask: Raster
    easting_m: float
    northing_m: float
    true_count: int


def simulate_field(sc: SimScenario) -> list[FieldTile]:
    """Binary berry-mask tiles with known instance counts.

    Tiles are laid out on a grid; a subset contains one overlapping pair at
    separation (2 - pair_overlap) * radius, which counts as two berries.
    """
    bf = sc.berry_field
    tiles = []
    cols = max(1, int(math.ceil(math.sqrt(bf.n_tiles))))
    for t_idx in range(bf.n_tiles):
        rng = np.random.default_rng([sc.seed, 11, t_idx])
        discs = []  # (cx, cy, r)
        margin = bf.radius_range[1] + 3.0

        def fits(cx, cy, r):
            return all(
                math.hypot(cx - ox, cy - oy) >= r + orr + 4.0
                for ox, oy, orr in discs
            )

        def place(r):
            for _ in range(200):
                cx = rng.uniform(margin, bf.tile_px - margin)
                cy = rng.uniform(margin, bf.tile_px - margin)
                if fits(cx, cy, r):
                    return cx, cy
            return None

        count = 0
        if rng.random() < bf.pair_fraction:
            r = rng.uniform(*bf.radius_range)
            sep = (2.0 - bf.pair_overlap) * r
            for _ in range(200):
                cx = rng.uniform(margin + sep, bf.tile_px - margin - sep)
                cy = rng.uniform(margin + sep, bf.tile_px - margin - sep)
                ang = rng.uniform(0.0, 2.0 * np.pi)
                ox = cx + sep * math.cos(ang)
                oy = cy + sep * math.sin(ang)
                if fits(cx, cy, r) and fits(ox, oy, r) and (
                    margin <= ox <= bf.tile_px - margin
                    and margin <= oy <= bf.tile_px - margin
                ):
                    discs.append((cx, cy, r))
                    discs.append((ox, oy, r))
                    count += 2
                    break
        n_singles = int(rng.integers(bf.singles_range[0], bf.singles_range[1] + 1))
        for _ in range(n_singles):
            r = rng.uniform(*bf.radius_range)
            spot = place(r)
            if spot is not None:
                discs.append((spot[0], spot[1], r))
                count += 1

        ys, xs = np.mgrid[0.0 : bf.tile_px, 0.0 : bf.tile_px]
        mask = np.zeros((bf.tile_px, bf.tile_px), dtype=bool)
        for cx, cy, r in discs:
            mask |= (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
        tiles.append(
            FieldTile(
                name=f"tile_{t_idx:04d}.png",
                mask=Raster(mask.astype(np.float64)),
                easting_m=(t_idx % cols) * bf.tile_spacing_m,
                northing_m=(t_idx // cols) * bf.tile_spacing_m,
                true_count=count,
            )
        )
    return tiles


def simulate_weather(
    sc: SimScenario, n_samples: int, dt_s: float = 300.0
) -> tuple[list[WeatherRecord], np.ndarray]:
    """Weather series plus the berry temperatures implied by the scenario's
    generator coefficients (berry temp is linear in irradiance, humidity and
    dew point plus Gaussian noise)."""
    rng = np.random.default_rng([sc.seed, 13])
    wc = sc.weather
    records = []
    temps = np.empty(n_samples)
    humidity = rng.uniform(45.0, 75.0)
    for i in range(n_samples):
        t = sc.start_time + timedelta(seconds=i * dt_s)
        day_phase = ((t.hour * 3600 + t.minute * 60 + t.second) / 86400.0) * 2 * np.pi
        elevation = 60.0 * math.sin(day_phase - np.pi / 2.0)
        cloudiness = np.clip(
            0.75 + 0.25 * math.sin(i / 17.0) + rng.normal(0.0, 0.08), 0.2, 1.0
        )
        irr = max(sc.clear_sky.irradiance(elevation) * cloudiness, 0.0)
        humidity = float(np.clip(humidity + rng.normal(0.0, 1.5), 25.0, 98.0))
        ambient = 58.0 + 22.0 * math.sin(day_phase - np.pi / 2.0) + rng.normal(0.0, 1.0)
        dew = ambient - (100.0 - humidity) / 5.0
        wind = max(rng.normal(6.0, 2.0), 0.0)
        rec = WeatherRecord(
            timestamp=t,
            ambient_temp_f=round(ambient, 2),
            wind_speed_mph=round(wind, 2),
            gust_speed_mph=round(wind + abs(rng.normal(2.0, 1.0)), 2),
            wind_dir_deg=float(rng.uniform(0.0, 360.0)) % 360.0,
            rel_humidity_pct=round(humidity, 2),
            dew_point_f=round(dew, 2),
            rain_in=0.0,
            wetness_pct=round(float(np.clip((humidity - 40.0) / 2.0, 0.0, 100.0)), 2),
            irradiance_wm2=round(irr, 2),
        )
        records.append(rec)
        temps[i] = (
            wc.base_temp_f
            + wc.irradiance * rec.irradiance_wm2
            + wc.humidity * rec.rel_humidity_pct
            + wc.dew_point * rec.dew_point_f
            + rng.normal(0.0, wc.noise_f)
        )
    return records, temps


def scenario_suite(seed: int = 0) -> dict[str, SimScenario]:
    """Six canonical sky scenarios used by the forecast acceptance suite.

    Moving clouds share velocity (0, 0.75) px/frame (0.15 px/s toward the
    sun at +y), slow enough that everything reaching the sun within a
    20-minute horizon is already inside the camera field at forecast time.
    Arrival times follow directly from upstream distances.
    """
    base = SimScenario(seed=seed, sun_elevation_deg=45.0)
    sun_x, sun_y = scenario_sun_pixel(base)  # approx (127.5, 196)
    v = (0.0, 0.75)

    def cloud(dist, radius, opacity, lateral=0.0, appear_s=0.0):
        return CloudDisc(x0=sun_x + lateral, y0=sun_y - dist, radius=radius,
                         vx=v[0], vy=v[1], opacity=opacity, appear_s=appear_s)

    suite = {
        "clear": replace(base, name="clear"),
        "thin_cloud": replace(
            base, name="thin_cloud",
            clouds=(cloud(85.0, 45.0, 0.5),),
        ),
        "opaque_crossing": replace(
            base, name="opaque_crossing",
            clouds=(cloud(130.0, 50.0, 0.95),),
        ),
        "popup_cloud": replace(
            base, name="popup_cloud",
            clouds=(cloud(70.0, 40.0, 0.9, appear_s=20.0),),
        ),
        "static_overcast": replace(
            base, name="static_overcast",
            clouds=(CloudDisc(x0=sun_x, y0=sun_y - 40.0, radius=400.0,
                              vx=0.0, vy=0.0, opacity=0.85),),
        ),
        "multi_cloud": replace(
            base, name="multi_cloud",
            # The third cloud is beyond both the field and the horizon; it
            # checks that unobservable scenery stays out of the forecast.
            clouds=(
                cloud(55.0, 36.0, 0.8, lateral=6.0),
                cloud(175.0, 42.0, 0.9, lateral=-8.0),
                cloud(280.0, 40.0, 0.7, lateral=4.0),
            ),
        ),
    }
    return suite
