"""Sun position, its image projection, and clear-sky irradiance.

The ephemeris is the classic low-precision almanac series (mean longitude
and anomaly, ecliptic obliquity, hour angle). No refraction and no delta-T
correction; the accuracy budget is 0.5 degrees over 1990-2050, which is far
tighter than the width of the occlusion prediction zone.
"""

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .camera import FisheyeCamera, ray_to_pixel
from .errors import ModelError

HAURWITZ_SCALE = 1098.0  # W/m^2
HAURWITZ_EXTINCTION = 0.057
FIT_MIN_SAMPLES = 50
FIT_BIN_DEG = 2.0


@dataclass(frozen=True)
class SunPosition:
    azimuth_deg: float  # clockwise from north
    elevation_deg: float
    timestamp: datetime

    def __post_init__(self):
        if not (0.0 <= self.azimuth_deg < 360.0):
            raise ValueError(f"azimuth {self.azimuth_deg} outside [0, 360)")
        if not (-90.0 <= self.elevation_deg <= 90.0):
            raise ValueError(f"elevation {self.elevation_deg} outside [-90, 90]")


def _julian_date(t: datetime) -> float:
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.timestamp() / 86400.0 + 2440587.5


def sun_position(t: datetime, lat_deg: float, lon_deg: float) -> SunPosition:
    """Apparent sun azimuth/elevation for a UTC time and site coordinates."""
    if abs(lat_deg) > 90.0:
        raise ValueError(f"latitude {lat_deg} outside [-90, 90]")
    jd = _julian_date(t)
    n = jd - 2451545.0

    mean_long = (280.460 + 0.9856474 * n) % 360.0
    mean_anom = math.radians((357.528 + 0.9856003 * n) % 360.0)
    ecl_long = math.radians(
        mean_long + 1.915 * math.sin(mean_anom) + 0.020 * math.sin(2.0 * mean_anom)
    )
    obliquity = math.radians(23.439 - 4.0e-7 * n)

    ra = math.atan2(math.cos(obliquity) * math.sin(ecl_long), math.cos(ecl_long))
    dec = math.asin(math.sin(obliquity) * math.sin(ecl_long))

    ut_hours = (jd + 0.5) % 1.0 * 24.0
    gmst = (6.697375 + 0.0657098242 * n + ut_hours) % 24.0
    ha = math.radians(((gmst * 15.0 + lon_deg - math.degrees(ra)) + 180.0) % 360.0 - 180.0)

    lat = math.radians(lat_deg)
    sin_el = math.sin(dec) * math.sin(lat) + math.cos(dec) * math.cos(lat) * math.cos(ha)
    el = math.asin(min(1.0, max(-1.0, sin_el)))
    az = math.atan2(
        -math.cos(dec) * math.sin(ha),
        math.sin(dec) * math.cos(lat) - math.cos(dec) * math.sin(lat) * math.cos(ha),
    )
    return SunPosition(
        azimuth_deg=math.degrees(az) % 360.0,
        elevation_deg=math.degrees(el),
        timestamp=t,
    )


def direction_from_azel(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Unit (east, north, up) vector for an azimuth/elevation pair."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return np.array(
        [math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)]
    )


def sun_pixel(cam: FisheyeCamera, s: SunPosition) -> tuple[float, float] | None:
    """Project the sun into the image; None when below the horizon or field."""
    if s.elevation_deg <= 0.0:
        return None
    return ray_to_pixel(cam, direction_from_azel(s.azimuth_deg, s.elevation_deg))


@dataclass(frozen=True)
class ClearSkyModel:
    """Cloudless irradiance as a function of sun elevation.

    Analytic mode is the Haurwitz form I = A sin(el) exp(-b / sin(el)).
    Fitted mode interpolates a monotone elevation -> irradiance table built
    from site history.
    """

    mode: str = "analytic"
    scale: float = HAURWITZ_SCALE  # A, W/m^2
    extinction: float = HAURWITZ_EXTINCTION  # b
    table_elevations: tuple[float, ...] = ()
    table_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode not in ("analytic", "fitted"):
            raise ModelError(f"unknown clear-sky mode {self.mode!r}")
        if self.scale <= 0.0:
            raise ModelError("scale must be positive")
        if self.mode == "fitted":
            if not self.table_elevations:
                raise ModelError("fitted clear-sky model has an empty table")
            if list(self.table_values) != sorted(self.table_values):
                raise ModelError("fitted table must be monotone non-decreasing")

    def irradiance(self, elevation_deg: float) -> float:
        if elevation_deg <= 0.0:
            return 0.0
        if self.mode == "analytic":
            s = math.sin(math.radians(elevation_deg))
            return self.scale * s * math.exp(-self.extinction / s)
        return float(
            np.interp(elevation_deg, self.table_elevations, self.table_values)
        )


def clear_sky_irradiance(model: ClearSkyModel, s: SunPosition) -> float:
    return model.irradiance(s.elevation_deg)


def fit_clear_sky(
    elevations_deg,
    irradiance_wm2,
    quantile: float = 0.95,
    bin_deg: float = FIT_BIN_DEG,
    min_samples: int = FIT_MIN_SAMPLES,
) -> ClearSkyModel:
    """Fit the envelope of measured irradiance over sun elevation.

    Per elevation bin the given quantile of the measurements is taken (an
    envelope that rejects both occlusion dips and sensor spikes), anchored at
    the matching quantile of the bin's elevations, then made monotone by a
    cumulative max over ascending elevation.
    """
    el = np.asarray(elevations_deg, dtype=np.float64)
    val = np.asarray(irradiance_wm2, dtype=np.float64)
    if el.shape != val.shape:
        raise ModelError("elevation and irradiance arrays differ in length")
    keep = el > 0.0
    el, val = el[keep], val[keep]
    if el.size < min_samples:
        raise ModelError(
            f"need at least {min_samples} daytime samples, got {el.size}"
        )
    bins = np.floor(el / bin_deg).astype(int)
    centers, envelope = [], []
    for b in np.unique(bins):
        sel = bins == b
        centers.append(float(np.quantile(el[sel], quantile)))
        envelope.append(float(np.quantile(val[sel], quantile)))
    envelope = np.maximum.accumulate(envelope).tolist()
    return ClearSkyModel(
        mode="fitted",
        table_elevations=tuple(centers),
        table_values=tuple(envelope),
    )


def save_clear_sky(model: ClearSkyModel, path) -> None:
    doc = {
        "mode": model.mode,
        "scale": model.scale,
        "extinction": model.extinction,
        "table_elevations": list(model.table_elevations),
        "table_values": list(model.table_values),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_clear_sky(path) -> ClearSkyModel:
    doc = json.loads(Path(path).read_text())
    return ClearSkyModel(
        mode=doc.get("mode", "analytic"),
        scale=float(doc.get("scale", HAURWITZ_SCALE)),
        extinction=float(doc.get("extinction", HAURWITZ_EXTINCTION)),
        table_elevations=tuple(doc.get("table_elevations", ())),
        table_values=tuple(doc.get("table_values", ())),
    )


@dataclass(frozen=True)
class Site:
    lat_deg: float
    lon_deg: float
    north_offset_deg: float = 0.0

    def __post_init__(self):
        if abs(self.lat_deg) > 90.0:
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")


def load_site(path) -> Site:
    doc = json.loads(Path(path).read_text())
    return Site(
        lat_deg=float(doc["lat"]),
        lon_deg=float(doc["lon"]),
        north_offset_deg=float(doc.get("north_offset_deg", 0.0)),
    )


def save_site(site: Site, path) -> None:
    doc = {
        "lat": site.lat_deg,
        "lon": site.lon_deg,
        "north_offset_deg": site.north_offset_deg,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
