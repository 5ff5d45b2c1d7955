"""Weather records: CSV ingest, model feature encoding, temporal CV splits."""

import csv
import logging
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import OrderingError, WeatherParseError

log = logging.getLogger(__name__)

WEATHER_COLUMNS = [
    "timestamp_utc",
    "ambient_temp_f",
    "wind_speed_mph",
    "gust_speed_mph",
    "wind_dir_deg",
    "rel_humidity_pct",
    "dew_point_f",
    "rain_in",
    "wetness_pct",
    "irradiance_wm2",
]

# Wind direction is circular, so it enters the models as a (sin, cos) pair.
FEATURE_NAMES = [
    "irradiance_wm2",
    "rel_humidity_pct",
    "dew_point_f",
    "gust_speed_mph",
    "wind_speed_mph",
    "wind_dir_sin",
    "wind_dir_cos",
    "wetness_pct",
]


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime
    ambient_temp_f: float
    wind_speed_mph: float
    gust_speed_mph: float
    wind_dir_deg: float
    rel_humidity_pct: float
    dew_point_f: float
    rain_in: float
    wetness_pct: float
    irradiance_wm2: float

    def violations(self) -> list[str]:
        out = []
        if not (0.0 <= self.rel_humidity_pct <= 100.0):
            out.append(f"rel_humidity_pct {self.rel_humidity_pct} outside [0, 100]")
        if not (0.0 <= self.wetness_pct <= 100.0):
            out.append(f"wetness_pct {self.wetness_pct} outside [0, 100]")
        if self.irradiance_wm2 < 0.0:
            out.append(f"irradiance_wm2 {self.irradiance_wm2} negative")
        if not (0.0 <= self.wind_dir_deg < 360.0):
            out.append(f"wind_dir_deg {self.wind_dir_deg} outside [0, 360)")
        return out


def _parse_timestamp(text: str) -> datetime:
    t = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def ingest_weather(path) -> list[WeatherRecord]:
    """Parse and validate a weather CSV; returns timestamp-sorted records.

    Rows that fail to parse or violate record invariants abort the ingest
    with an error listing the offending line numbers. Out-of-order (but
    unique) timestamps are sorted with a warning; duplicates are an error.
    """
    records: list[tuple[int, WeatherRecord]] = []
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in WEATHER_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise WeatherParseError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = WeatherRecord(
                    timestamp=_parse_timestamp(row["timestamp_utc"]),
                    ambient_temp_f=float(row["ambient_temp_f"]),
                    wind_speed_mph=float(row["wind_speed_mph"]),
                    gust_speed_mph=float(row["gust_speed_mph"]),
                    wind_dir_deg=float(row["wind_dir_deg"]),
                    rel_humidity_pct=float(row["rel_humidity_pct"]),
                    dew_point_f=float(row["dew_point_f"]),
                    rain_in=float(row["rain_in"]),
                    wetness_pct=float(row["wetness_pct"]),
                    irradiance_wm2=float(row["irradiance_wm2"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            bad = rec.violations()
            if bad:
                problems.append(f"line {lineno}: " + "; ".join(bad))
                continue
            records.append((lineno, rec))
    if problems:
        raise WeatherParseError(f"{path}: rejected rows: " + " | ".join(problems))
    stamps = [r.timestamp for _, r in records]
    if len(set(stamps)) != len(stamps):
        dupes = sorted({t.isoformat() for t in stamps if stamps.count(t) > 1})
        raise OrderingError(f"{path}: duplicate timestamps {dupes}")
    ordered = sorted(records, key=lambda item: item[1].timestamp)
    if [r for _, r in ordered] != [r for _, r in records]:
        log.warning("%s: timestamps out of order, sorted on ingest", path)
    return [r for _, r in ordered]


def write_weather_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(WEATHER_COLUMNS)
        for r in records:
            writer.writerow([
                r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                f"{r.ambient_temp_f:.2f}", f"{r.wind_speed_mph:.2f}",
                f"{r.gust_speed_mph:.2f}", f"{r.wind_dir_deg:.2f}",
                f"{r.rel_humidity_pct:.2f}", f"{r.dew_point_f:.2f}",
                f"{r.rain_in:.3f}", f"{r.wetness_pct:.2f}",
                f"{r.irradiance_wm2:.2f}",
            ])


def feature_vector(rec: WeatherRecord, irradiance_override: float | None = None):
    wd = np.radians(rec.wind_dir_deg)
    irr = rec.irradiance_wm2 if irradiance_override is None else irradiance_override
    return np.array([
        irr,
        rec.rel_humidity_pct,
        rec.dew_point_f,
        rec.gust_speed_mph,
        rec.wind_speed_mph,
        np.sin(wd),
        np.cos(wd),
        rec.wetness_pct,
    ])


def feature_matrix(records) -> tuple[np.ndarray, list[str]]:
    if not records:
        return np.zeros((0, len(FEATURE_NAMES))), list(FEATURE_NAMES)
    return np.vstack([feature_vector(r) for r in records]), list(FEATURE_NAMES)


def aggregate_importances(importances, names) -> dict[str, float]:
    """Collapse circular sin/cos pairs back onto their base feature name."""
    out: dict[str, float] = {}
    for imp, name in zip(importances, names, strict=True):
        base = name[:-4] if name.endswith(("_sin", "_cos")) else name
        out[base] = out.get(base, 0.0) + float(imp)
    return out


def temporal_cv_splits(n: int, folds: int = 5, test_fraction: float = 0.3):
    """Contiguous-block temporal splits: each fold holds out one block of
    test_fraction of the timeline, block starts spread evenly across it."""
    if not (0.0 < test_fraction < 1.0) or folds < 1 or n < 2:
        raise ValueError("bad split parameters")
    test_len = max(1, int(round(n * test_fraction)))
    max_start = n - test_len
    splits = []
    for k in range(folds):
        start = round(k * max_start / max(folds - 1, 1))
        test_idx = np.arange(start, start + test_len)
        train_idx = np.concatenate([np.arange(0, start),
                                    np.arange(start + test_len, n)])
        splits.append((train_idx, test_idx))
    return splits
