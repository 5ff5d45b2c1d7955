"""bogwatch command-line interface."""

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import berries as berries_mod
from . import metrics as metrics_mod
from . import simulate as sim
from .clouds import cloud_probability
from .errors import BogwatchError, DataError
from .flow import consistency_check, lucas_kanade_flow, mask_flow
from .forest import ForestConfig, load_forest, predict_forest, save_forest, train_random_forest
from .imgio import read_image, write_flow, write_gray, write_image
from .mlp import MlpConfig, load_mlp, predict_mlp, save_mlp, train_mlp
from .pipeline import PipelineConfig, load_config, run_pipeline, write_outputs
from .solar import fit_clear_sky, load_site, save_clear_sky, sun_position
from .weather import (
    aggregate_importances,
    feature_matrix,
    ingest_weather,
    write_weather_csv,
)

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


def _frames_in(directory) -> list[Path]:
    paths = sorted(p for p in Path(directory).iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise DataError(f"{directory}: no frames found")
    return paths


def cmd_segment_clouds(args):
    paths = _frames_in(args.in_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in paths:
        prob = cloud_probability(read_image(p), args.t, args.k)
        write_gray(prob.data, out / f"{p.stem}_cloudprob.png")
    print(f"segmented {len(paths)} frames into {out}")


def cmd_flow(args):
    paths = _frames_in(args.in_dir)
    if len(paths) < 2:
        raise DataError("need at least two frames")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prev = read_image(paths[0])
    for p in paths[1:]:
        cur = read_image(p)
        fwd = lucas_kanade_flow(prev.gray(), cur.gray(),
                                args.levels, args.window, args.iters)
        bwd = lucas_kanade_flow(cur.gray(), prev.gray(),
                                args.levels, args.window, args.iters)
        flow = consistency_check(fwd, bwd, args.consistency_tol)
        if args.mask_clouds:
            flow = mask_flow(flow, cloud_probability(cur))
        write_flow(flow, out / f"{p.stem}_flow")
        prev = cur
    print(f"wrote flow for {len(paths) - 1} frame pairs into {out}")


def cmd_clearsky_fit(args):
    site = load_site(args.site)
    records = ingest_weather(args.weather)
    elevations = [
        sun_position(r.timestamp, site.lat_deg, site.lon_deg).elevation_deg
        for r in records
    ]
    values = [r.irradiance_wm2 for r in records]
    model = fit_clear_sky(elevations, values, quantile=args.quantile)
    save_clear_sky(model, args.out)
    print(f"fitted clear-sky table with {len(model.table_elevations)} bins "
          f"-> {args.out}")


def _temp_training_data(weather_csv, target_csv):
    records = ingest_weather(weather_csv)
    targets = {}
    with open(target_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            t = datetime.fromisoformat(
                row["timestamp_utc"].replace("Z", "+00:00")
            ).astimezone(timezone.utc)
            targets[t] = float(row["berry_temp_f"])
    pairs = [(r, targets[r.timestamp]) for r in records if r.timestamp in targets]
    if not pairs:
        raise DataError("no timestamp overlap between weather and target files")
    X, names = feature_matrix([r for r, _ in pairs])
    y = np.array([t for _, t in pairs])
    return X, y, names


def cmd_train_temp(args):
    X, y, names = _temp_training_data(args.weather, args.target)
    if args.model == "forest":
        model = train_random_forest(X, y, ForestConfig(seed=args.seed))
        save_forest(model, args.out, feature_names=names)
        agg = aggregate_importances(model.importances, names)
        order = sorted(agg, key=lambda k: -agg[k])
        print("feature importance: " + ", ".join(
            f"{k}={agg[k]:.3f}" for k in order))
    else:
        model = train_mlp(X, y, MlpConfig(seed=args.seed))
        save_mlp(model, args.out, feature_names=names)
    print(f"trained {args.model} on {y.size} samples -> {args.out}")


def cmd_predict_temp(args):
    doc = json.loads(Path(args.model).read_text())
    if doc.get("type") == "forest":
        model, _ = load_forest(args.model)
        predict = lambda X: predict_forest(model, X)
    elif doc.get("type") == "mlp":
        model, _ = load_mlp(args.model)
        predict = lambda X: predict_mlp(model, X)
    else:
        raise DataError(f"{args.model}: unknown model type")
    records = ingest_weather(args.weather)
    X, _ = feature_matrix(records)
    preds = np.atleast_1d(predict(X))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_utc", "berry_temp_f"])
        for r, p in zip(records, preds):
            writer.writerow([r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                             f"{p:.3f}"])
    print(f"predicted {preds.size} rows -> {args.out}")


def cmd_count_berries(args):
    manifest = berries_mod.read_manifest(args.manifest)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "easting_m", "northing_m", "count"])
        for name, easting, northing in manifest:
            mask = read_image(Path(args.masks) / name)
            c = berries_mod.count(mask, args.min_split_area, args.min_marker_sep)
            writer.writerow([name, f"{easting:.3f}", f"{northing:.3f}", c])
    print(f"counted {len(manifest)} tiles -> {args.out}")


def cmd_density_map(args):
    tiles = []
    with open(args.counts, newline="") as fh:
        for row in csv.DictReader(fh):
            tiles.append((float(row["easting_m"]), float(row["northing_m"]),
                          float(row["count"])))
    if not tiles:
        raise DataError(f"{args.counts}: no tiles")
    eastings = [t[0] for t in tiles]
    northings = [t[1] for t in tiles]
    extent = (min(eastings), min(northings),
              max(eastings) + args.cell_size, max(northings) + args.cell_size)
    dm = berries_mod.density_map(tiles, args.cell_size, extent)
    berries_mod.write_density_csv(dm, args.out)
    if args.heat_image:
        write_image(berries_mod.density_heat_image(dm), args.heat_image)
    print(f"density grid {dm.sums.shape[1]}x{dm.sums.shape[0]} -> {args.out}")


def cmd_simulate(args):
    suite = sim.scenario_suite(seed=args.seed)
    if args.scenario not in suite:
        raise DataError(f"unknown scenario {args.scenario!r}; "
                        f"pick from {sorted(suite)}")
    sc = suite[args.scenario]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.what == "sky":
        frames, series = sim.simulate_sky(sc, args.frames)
        from .camera import save_camera
        save_camera(sim.sim_camera(sc), out / "camera.json")
        for i, frame in enumerate(frames):
            write_image(frame, out / f"frame_{i:04d}.png")
        with open(out / "exact_irradiance.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp_utc", "irradiance_wm2"])
            for t, v in zip(series.timestamps, series.values):
                writer.writerow([t.strftime("%Y-%m-%dT%H:%M:%SZ"), f"{v:.3f}"])
        print(f"rendered {len(frames)} frames -> {out}")
    elif args.what == "field":
        tiles = sim.simulate_field(sc)
        rows = []
        with open(out / "true_counts.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["filename", "true_count"])
            for tile in tiles:
                write_image(tile.mask, out / tile.name)
                rows.append((tile.name, tile.easting_m, tile.northing_m))
                writer.writerow([tile.name, tile.true_count])
        berries_mod.write_manifest(rows, out / "tiles.csv")
        print(f"wrote {len(tiles)} mask tiles -> {out}")
    else:  # weather
        records, temps = sim.simulate_weather(sc, args.samples)
        write_weather_csv(records, out / "weather.csv")
        with open(out / "berry_temp.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp_utc", "berry_temp_f"])
            for r, tv in zip(records, temps):
                writer.writerow([r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                                 f"{tv:.3f}"])
        print(f"wrote {len(records)} weather samples -> {out}")


def cmd_forecast(args):
    if args.scenario:
        cfg = PipelineConfig(seed=args.seed, scenario=args.scenario,
                             scenario_frames=args.frames)
    else:
        if not (args.sky and args.camera and args.site and args.reference_time):
            raise DataError("file-backed forecast needs --sky, --camera, "
                            "--site and --reference-time")
        cfg = PipelineConfig(
            seed=args.seed,
            frames_dir=args.sky,
            camera_file=args.camera,
            site_file=args.site,
            frame_dt_s=args.frame_dt,
            reference_time_utc=datetime.fromisoformat(
                args.reference_time.replace("Z", "+00:00")),
            clear_sky_file=args.clear_sky,
        )
    from dataclasses import replace
    cfg = replace(cfg, forecast=replace(cfg.forecast, horizon_s=args.horizon,
                                        step_s=args.step))
    report = run_pipeline(cfg)
    from .pipeline import write_forecast_csv
    write_forecast_csv(report, args.out)
    print(f"forecast over {args.horizon:.0f} s -> {args.out}")


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    report = run_pipeline(cfg)
    paths = write_outputs(report, args.out)
    print(f"report -> {paths['report_txt']}")
    if report.flagged_cells:
        print(f"{len(report.flagged_cells)} high-risk cell(s) flagged")


def _read_series(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    return np.array([float(r[-1]) for r in rows[1:]])


def cmd_eval(args):
    pred = _read_series(args.pred)
    truth = _read_series(args.truth)
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    results = {}
    for m in wanted:
        if m == "mape":
            results[m] = metrics_mod.mape(truth, pred, normalized=args.normalized)
        elif m == "r2":
            results[m] = metrics_mod.r_squared(truth, pred,
                                               norm_ratio=args.r2_norm_ratio)
        elif m == "frechet":
            a, b = truth, pred
            if args.normalized:
                a = metrics_mod.normalize_minmax(a)
                b = metrics_mod.normalize_minmax(b)
            results[m] = metrics_mod.frechet(a, b)
        else:
            raise DataError(f"unknown metric {m!r} (use mape, r2, frechet)")
    width = max(len(m) for m in results)
    for m, v in results.items():
        print(f"{m:<{width}}  {v:.6f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps({k: round(v, 9) for k, v in results.items()},
                       indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bogwatch",
        description="Sky-camera irradiance nowcasting, berry counting, and "
                    "crop heat-risk reporting.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment-clouds", help="per-pixel cloud probability maps")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--t", type=float, default=0.10,
                   help="blue/red ratio threshold")
    p.add_argument("--k", type=float, default=40.0, help="logistic steepness")
    p.set_defaults(func=cmd_segment_clouds)

    p = sub.add_parser("flow", help="dense cloud motion between frames")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--consistency-tol", type=float, default=1.0)
    p.add_argument("--mask-clouds", action="store_true",
                   help="scale flow by cloud probability before writing")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("clearsky-fit", help="fit clear-sky curve from history")
    p.add_argument("--weather", required=True)
    p.add_argument("--site", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quantile", type=float, default=0.95)
    p.set_defaults(func=cmd_clearsky_fit)

    p = sub.add_parser("train-temp", help="train berry temperature model")
    p.add_argument("--weather", required=True)
    p.add_argument("--target", required=True,
                   help="CSV with timestamp_utc, berry_temp_f")
    p.add_argument("--model", choices=("forest", "mlp"), default="forest")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_temp)

    p = sub.add_parser("predict-temp", help="predict berry temperature")
    p.add_argument("--model", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict_temp)

    p = sub.add_parser("count-berries", help="count berries per mask tile")
    p.add_argument("--masks", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-split-area", type=int,
                   default=berries_mod.MIN_SPLIT_AREA)
    p.add_argument("--min-marker-sep", type=float,
                   default=berries_mod.MIN_MARKER_SEP)
    p.set_defaults(func=cmd_count_berries)

    p = sub.add_parser("density-map", help="grid counts into a density map")
    p.add_argument("--counts", required=True,
                   help="CSV from count-berries")
    p.add_argument("--cell-size", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.add_argument("--heat-image", default=None)
    p.set_defaults(func=cmd_density_map)

    p = sub.add_parser("simulate", help="generate synthetic scenes")
    p.add_argument("--what", choices=("sky", "field", "weather"),
                   required=True)
    p.add_argument("--scenario", default="opaque_crossing")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--samples", type=int, default=1500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forecast", help="irradiance forecast from sky frames")
    p.add_argument("--sky", help="directory of frames")
    p.add_argument("--camera")
    p.add_argument("--site")
    p.add_argument("--clear-sky", default=None)
    p.add_argument("--scenario", default=None,
                   help="use a simulator scenario instead of files")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--frame-dt", type=float, default=5.0)
    p.add_argument("--reference-time", default=None,
                   help="UTC time of the last frame, ISO format")
    p.add_argument("--horizon", type=float, default=1200.0)
    p.add_argument("--step", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="compare forecast and truth series")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--metrics", default="mape,r2,frechet")
    p.add_argument("--normalized", action="store_true",
                   help="min-max normalize series first")
    p.add_argument("--r2-norm-ratio", action="store_true",
                   help="norm-ratio R-squared variant")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except BogwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
