"""End-to-end run: sky frames to irradiance forecast to berry-temperature
risk report, fused with field counting.

Deterministic by construction: everything is a pure function of the config,
input files, and the seed, so two runs emit byte-identical outputs.
"""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from . import berries as berries_mod
from . import simulate as sim
from .camera import load_camera
from .clouds import cloud_probability, sun_glare_exclusion
from .errors import DataError, NoSunError
from .flow import (
    DEFAULT_CONSISTENCY_TOL,
    MotionWeights,
    consistency_check,
    global_motion,
    lucas_kanade_flow,
)
from .forecast import (
    DEFAULT_ALPHA,
    DEFAULT_STEP_SECONDS,
    DEFAULT_ZONE_WIDTH_FRACTION,
    build_prediction_zone,
    forecast_irradiance,
    occlusion_profile,
)
from .forest import load_forest, predict_forest
from .imgio import read_image
from .mlp import load_mlp, predict_mlp
from .raster import FlowField
from .solar import ClearSkyModel, SunPosition, load_clear_sky, load_site, sun_pixel, sun_position
from .weather import feature_vector, ingest_weather

STALE_WEATHER_S = 30 * 60.0

FORECAST_COLUMNS = ["timestamp_utc", "horizon_s", "occlusion", "confidence",
                    "irradiance_wm2"]


@dataclass(frozen=True)
class RiskThresholds:
    temp_threshold_f: float  # mandatory, no default: a silent default here
    count_threshold: float   # would silently mis-flag a field


@dataclass(frozen=True)
class ForecastParams:
    horizon_s: float = 1200.0
    step_s: float = DEFAULT_STEP_SECONDS
    alpha: float = DEFAULT_ALPHA
    zone_width_frac: float = DEFAULT_ZONE_WIDTH_FRACTION
    consistency_tol_px: float = DEFAULT_CONSISTENCY_TOL
    glare_radius_px: float = 0.0
    seg_threshold: float = 0.10
    seg_steepness: float = 40.0
    lk_levels: int = 3
    lk_window: int = 15
    lk_iters: int = 5

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon_s / self.step_s)))


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    camera_file: str | None = None
    site_file: str | None = None
    scenario: str | None = None  # simulator-backed run
    scenario_frames: int = 8
    frames_dir: str | None = None  # file-backed run
    frame_dt_s: float = 5.0
    reference_time_utc: datetime | None = None
    weather_csv: str | None = None
    temp_model_file: str | None = None
    clear_sky_file: str | None = None
    masks_dir: str | None = None
    manifest_csv: str | None = None
    cell_size_m: float = 10.0
    forecast: ForecastParams = field(default_factory=ForecastParams)
    risk: RiskThresholds | None = None
    base_dir: Path = Path(".")

    def resolve(self, name: str | None) -> Path | None:
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path) -> PipelineConfig:
    path = Path(path)
    doc = json.loads(path.read_text())
    fc = doc.get("forecast", {})
    seg = fc.get("segmentation", {})
    risk = doc.get("risk")
    ref = doc.get("reference_time_utc")
    sky = doc.get("sky", {})
    return PipelineConfig(
        seed=int(doc.get("seed", 0)),
        camera_file=doc.get("camera_file"),
        site_file=doc.get("site_file"),
        scenario=sky.get("scenario"),
        scenario_frames=int(sky.get("frames", 8)),
        frames_dir=sky.get("frames_dir"),
        frame_dt_s=float(sky.get("frame_dt_s", 5.0)),
        reference_time_utc=(
            datetime.fromisoformat(ref.replace("Z", "+00:00")) if ref else None
        ),
        weather_csv=doc.get("weather_csv"),
        temp_model_file=doc.get("temp_model_file"),
        clear_sky_file=doc.get("clear_sky_file"),
        masks_dir=(doc.get("berries") or {}).get("masks_dir"),
        manifest_csv=(doc.get("berries") or {}).get("manifest"),
        cell_size_m=float((doc.get("berries") or {}).get("cell_size_m", 10.0)),
        forecast=ForecastParams(
            horizon_s=float(fc.get("horizon_s", 1200.0)),
            step_s=float(fc.get("step_s", DEFAULT_STEP_SECONDS)),
            alpha=float(fc.get("alpha", DEFAULT_ALPHA)),
            zone_width_frac=float(
                fc.get("zone_width_frac", DEFAULT_ZONE_WIDTH_FRACTION)
            ),
            consistency_tol_px=float(
                fc.get("consistency_tol_px", DEFAULT_CONSISTENCY_TOL)
            ),
            glare_radius_px=float(fc.get("glare_radius_px", 0.0)),
            seg_threshold=float(seg.get("threshold", 0.10)),
            seg_steepness=float(seg.get("steepness", 40.0)),
            lk_levels=int(fc.get("lk_levels", 3)),
            lk_window=int(fc.get("lk_window", 15)),
            lk_iters=int(fc.get("lk_iters", 5)),
        ),
        risk=(
            RiskThresholds(
                temp_threshold_f=float(risk["temp_threshold_f"]),
                count_threshold=float(risk["count_threshold"]),
            )
            if risk
            else None
        ),
        base_dir=path.parent,
    )


@dataclass(frozen=True)
class FlaggedCell:
    cell_x: int
    cell_y: int
    count: float
    predicted_temp_f: float


@dataclass(frozen=True)
class RiskReport:
    reference_time: datetime
    horizons_s: tuple[float, ...]
    irradiance_wm2: tuple[float, ...]
    occlusion: tuple[float, ...]
    confidence: tuple[float, ...]
    berry_temp_f: tuple[float, ...] | None
    temp_risk: tuple[bool, ...] | None
    global_motion: tuple[float, float, float]  # vx, vy, confidence
    density: berries_mod.CountDensityMap | None
    flagged_cells: tuple[FlaggedCell, ...]
    thresholds: RiskThresholds | None
    warnings: tuple[str, ...]


def flag_cells(density, temps, thresholds) -> tuple[FlaggedCell, ...]:
    """A cell is flagged iff its summed count >= count_threshold AND the
    peak predicted berry temperature >= temp_threshold."""
    if density is None or thresholds is None or temps is None or not len(temps):
        return ()
    peak = max(temps)
    if peak < thresholds.temp_threshold_f:
        return ()
    out = []
    ny, nx = density.sums.shape
    for iy in range(ny):
        for ix in range(nx):
            if density.sums[iy, ix] >= thresholds.count_threshold:
                out.append(FlaggedCell(ix, iy, float(density.sums[iy, ix]), peak))
    return tuple(out)


def _timestamp(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _load_temp_model(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("type") == "forest":
        model, _ = load_forest(path)
        return lambda x: predict_forest(model, x)
    if doc.get("type") == "mlp":
        model, _ = load_mlp(path)
        return lambda x: predict_mlp(model, x)
    raise DataError(f"{path}: unknown model type {doc.get('type')!r}")


def _sky_inputs(cfg: PipelineConfig):
    """Frames, reference time, sun position source, and clear-sky model."""
    if cfg.scenario is not None:
        suite = sim.scenario_suite(seed=cfg.seed)
        if cfg.scenario not in suite:
            raise DataError(
                f"unknown scenario {cfg.scenario!r}; pick from {sorted(suite)}"
            )
        sc = suite[cfg.scenario]
        frames, _ = sim.simulate_sky(sc, cfg.scenario_frames)
        ref_time = sc.start_time + timedelta(
            seconds=(cfg.scenario_frames - 1) * sc.frame_dt_s
        )
        cam = sim.sim_camera(sc)

        def sun_at(t: datetime) -> SunPosition:
            return SunPosition(sc.sun_azimuth_deg, sc.sun_elevation_deg, t)

        return frames, sc.frame_dt_s, ref_time, cam, sun_at, sc.clear_sky

    if cfg.frames_dir is None:
        raise DataError("config needs either sky.scenario or sky.frames_dir")
    frame_paths = sorted(
        p for p in cfg.resolve(cfg.frames_dir).iterdir()
        if p.suffix.lower() in (".png", ".pgm", ".ppm", ".pnm")
    )
    if len(frame_paths) < 2:
        raise DataError(f"{cfg.frames_dir}: need at least 2 frames")
    frames = [read_image(p) for p in frame_paths[-2:]]
    if cfg.reference_time_utc is None:
        raise DataError("file-backed runs need reference_time_utc")
    ref_time = cfg.reference_time_utc
    if cfg.camera_file is None or cfg.site_file is None:
        raise DataError("file-backed runs need camera_file and site_file")
    site = load_site(cfg.resolve(cfg.site_file))
    cam = load_camera(
        cfg.resolve(cfg.camera_file),
        default_north_offset_deg=site.north_offset_deg,
    )

    def sun_at(t: datetime) -> SunPosition:
        return sun_position(t, site.lat_deg, site.lon_deg)

    clear_sky = (
        load_clear_sky(cfg.resolve(cfg.clear_sky_file))
        if cfg.clear_sky_file
        else ClearSkyModel()
    )
    return frames, cfg.frame_dt_s, ref_time, cam, sun_at, clear_sky


def run_pipeline(cfg: PipelineConfig) -> RiskReport:
    fp = cfg.forecast
    warnings: list[str] = []

    frames, frame_dt, ref_time, cam, sun_at, clear_sky = _sky_inputs(cfg)
    prev, last = frames[-2], frames[-1]

    sun_now = sun_at(ref_time)
    sun_px = sun_pixel(cam, sun_now)
    if sun_px is None:
        raise NoSunError(
            f"sun below horizon or outside field at {_timestamp(ref_time)}"
        )

    prob = cloud_probability(last, fp.seg_threshold, fp.seg_steepness)
    fwd = lucas_kanade_flow(prev.gray(), last.gray(),
                            fp.lk_levels, fp.lk_window, fp.lk_iters)
    bwd = lucas_kanade_flow(last.gray(), prev.gray(),
                            fp.lk_levels, fp.lk_window, fp.lk_iters)
    flow = consistency_check(fwd, bwd, fp.consistency_tol_px)
    if fp.glare_radius_px > 0.0:
        keep = ~sun_glare_exclusion(flow.width, flow.height, sun_px,
                                    fp.glare_radius_px)
        flow = FlowField(flow.u, flow.v, flow.valid & keep)
    gm = global_motion(flow, prob, sun_px,
                       MotionWeights(sigma_d=last.width / 2.0))

    zone = build_prediction_zone(sun_px, gm, fp.horizon_s, frame_dt,
                                 fp.zone_width_frac * last.width)
    profile = occlusion_profile(prob, zone, gm, fp.steps)
    step_times = [ref_time + timedelta(seconds=fp.step_s * (k + 1))
                  for k in range(fp.steps)]
    clearsky_values = [clear_sky.irradiance(sun_at(t).elevation_deg)
                       for t in step_times]
    series = forecast_irradiance(profile, clearsky_values, fp.alpha,
                                 start=ref_time, step_seconds=fp.step_s)

    # Berry temperature over the horizon: forecast irradiance replaces the
    # measured value; the remaining weather features hold at their latest
    # reading (near-term constancy).
    berry_temp = None
    temp_risk = None
    if cfg.weather_csv and cfg.temp_model_file:
        records = ingest_weather(cfg.resolve(cfg.weather_csv))
        if not records:
            raise DataError(f"{cfg.weather_csv}: no weather records")
        latest = records[-1]
        age = (ref_time - latest.timestamp).total_seconds()
        if age > STALE_WEATHER_S:
            warnings.append(
                f"weather is stale: latest record {_timestamp(latest.timestamp)} "
                f"is {age / 60.0:.0f} min before the reference time"
            )
        predict = _load_temp_model(cfg.resolve(cfg.temp_model_file))
        berry_temp = tuple(
            float(predict(feature_vector(latest, irradiance_override=v)))
            for v in series.values
        )
        if cfg.risk:
            temp_risk = tuple(t >= cfg.risk.temp_threshold_f for t in berry_temp)

    density = None
    if cfg.masks_dir and cfg.manifest_csv:
        manifest = berries_mod.read_manifest(cfg.resolve(cfg.manifest_csv))
        tiles = []
        for name, easting, northing in manifest:
            mask = read_image(cfg.resolve(cfg.masks_dir) / name)
            tiles.append((easting, northing, berries_mod.count(mask)))
        eastings = [t[0] for t in tiles]
        northings = [t[1] for t in tiles]
        extent = (min(eastings), min(northings),
                  max(eastings) + cfg.cell_size_m,
                  max(northings) + cfg.cell_size_m)
        density = berries_mod.density_map(tiles, cfg.cell_size_m, extent)

    flagged = flag_cells(density, berry_temp, cfg.risk)
    return RiskReport(
        reference_time=ref_time,
        horizons_s=tuple(fp.step_s * (k + 1) for k in range(fp.steps)),
        irradiance_wm2=tuple(float(v) for v in series.values),
        occlusion=profile.occlusion,
        confidence=profile.confidence,
        berry_temp_f=berry_temp,
        temp_risk=temp_risk,
        global_motion=(gm.vx, gm.vy, gm.confidence),
        density=density,
        flagged_cells=flagged,
        thresholds=cfg.risk,
        warnings=tuple(warnings),
    )


def write_forecast_csv(report: RiskReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FORECAST_COLUMNS)
        for k, h in enumerate(report.horizons_s):
            t = report.reference_time + timedelta(seconds=h)
            writer.writerow([
                _timestamp(t), f"{h:.0f}", f"{report.occlusion[k]:.6f}",
                f"{report.confidence[k]:.6f}",
                f"{report.irradiance_wm2[k]:.3f}",
            ])


def report_to_json(report: RiskReport) -> str:
    doc = {
        "reference_time_utc": _timestamp(report.reference_time),
        "global_motion": {
            "vx_px_per_frame": round(report.global_motion[0], 6),
            "vy_px_per_frame": round(report.global_motion[1], 6),
            "confidence": round(report.global_motion[2], 6),
        },
        "forecast": [
            {
                "horizon_s": h,
                "occlusion": round(report.occlusion[k], 6),
                "confidence": round(report.confidence[k], 6),
                "irradiance_wm2": round(report.irradiance_wm2[k], 3),
                **(
                    {
                        "berry_temp_f": round(report.berry_temp_f[k], 3),
                        "temp_risk": bool(report.temp_risk[k])
                        if report.temp_risk is not None
                        else None,
                    }
                    if report.berry_temp_f is not None
                    else {}
                ),
            }
            for k, h in enumerate(report.horizons_s)
        ],
        "berries": (
            {
                "cell_size_m": report.density.cell_size_m,
                "extent": list(report.density.extent),
                "total_count": float(report.density.sums.sum()),
                "cells": [
                    {
                        "cell_x": ix,
                        "cell_y": iy,
                        "count": float(report.density.sums[iy, ix]),
                        "images": int(report.density.images[iy, ix]),
                    }
                    for iy in range(report.density.sums.shape[0])
                    for ix in range(report.density.sums.shape[1])
                    if report.density.images[iy, ix] > 0
                ],
            }
            if report.density is not None
            else None
        ),
        "flagged_cells": [
            {
                "cell_x": c.cell_x,
                "cell_y": c.cell_y,
                "count": c.count,
                "predicted_temp_f": round(c.predicted_temp_f, 3),
            }
            for c in report.flagged_cells
        ],
        "thresholds": (
            {
                "temp_threshold_f": report.thresholds.temp_threshold_f,
                "count_threshold": report.thresholds.count_threshold,
            }
            if report.thresholds
            else None
        ),
        "warnings": list(report.warnings),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_to_text(report: RiskReport) -> str:
    lines = [
        "bogwatch risk report",
        f"reference time: {_timestamp(report.reference_time)}",
        f"global cloud motion: ({report.global_motion[0]:+.3f}, "
        f"{report.global_motion[1]:+.3f}) px/frame, "
        f"confidence {report.global_motion[2]:.2f}",
        "",
        "horizon  occlusion  conf   irradiance"
        + ("   berry_temp  risk" if report.berry_temp_f is not None else ""),
    ]
    for k, h in enumerate(report.horizons_s):
        row = (f"{h / 60.0:5.1f}m   {report.occlusion[k]:.3f}     "
               f"{report.confidence[k]:.2f}   {report.irradiance_wm2[k]:7.1f}")
        if report.berry_temp_f is not None:
            risk = ""
            if report.temp_risk is not None:
                risk = "  HIGH" if report.temp_risk[k] else "  ok"
            row += f"      {report.berry_temp_f[k]:6.1f}{risk}"
        lines.append(row)
    lines.append("")
    if report.density is not None:
        lines.append(f"exposed berries counted: {report.density.sums.sum():.0f} "
                     f"over {int(report.density.images.sum())} tiles")
    if report.flagged_cells:
        lines.append("HIGH RISK cells (count >= threshold and predicted "
                     "temperature >= threshold):")
        for c in report.flagged_cells:
            lines.append(f"  cell ({c.cell_x}, {c.cell_y}): count {c.count:.0f}, "
                         f"predicted {c.predicted_temp_f:.1f} F")
    else:
        lines.append("no cells flagged")
    for w in report.warnings:
        lines.append(f"WARNING: {w}")
    return "\n".join(lines) + "\n"


def write_outputs(report: RiskReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "forecast_csv": out / "forecast.csv",
        "report_json": out / "report.json",
        "report_txt": out / "report.txt",
    }
    write_forecast_csv(report, paths["forecast_csv"])
    paths["report_json"].write_text(report_to_json(report))
    paths["report_txt"].write_text(report_to_text(report))
    return paths
