"""Acceptance gate: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`).

Expected values follow the oracle-first rule: brute-force reimplementations
(oracles.py), published reference points, or closed-form scene geometry.
"""

import json
import math
import time
from datetime import datetime, timezone

import numpy as np
import pytest

from bogwatch.berries import connected_components, count, count_error, selective_watershed
from bogwatch.clouds import cloud_probability
from bogwatch.cli import main as cli_main
from bogwatch.flow import (
    MotionWeights,
    consistency_check,
    global_motion,
    lucas_kanade_flow,
)
from bogwatch.forecast import build_prediction_zone, forecast_irradiance, occlusion_profile
from bogwatch.forest import ForestConfig, predict_forest, rank_features, train_random_forest
from bogwatch.metrics import frechet, mape, mean_iou, normalize_minmax, r_squared
from bogwatch.mlp import MlpConfig, predict_mlp, train_mlp
from bogwatch.simulate import (
    CloudDisc,
    SimScenario,
    exact_irradiance,
    scenario_suite,
    scenario_sun_pixel,
    simulate_field,
    simulate_sky,
)
from bogwatch.solar import ClearSkyModel, fit_clear_sky, sun_position
from bogwatch.weather import FEATURE_NAMES, temporal_cv_splits
from oracles import (
    azimuth_delta,
    frechet_brute,
    mape_brute,
    mean_iou_brute,
    meeus_sun,
    r_squared_brute,
)
from synth import shifted_pair, texture


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {number} failed: {detail}"


def test_c01_metrics_oracle_equivalence():
    rng = np.random.default_rng(20240817)
    start = time.monotonic()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        truth = rng.uniform(0.5, 10.0, n)
        pred = rng.uniform(0.5, 10.0, n)
        pairs = [
            (mape(truth, pred), mape_brute(truth.tolist(), pred.tolist())),
            (r_squared(truth, pred), r_squared_brute(truth.tolist(), pred.tolist())),
        ]
        a = rng.normal(0.0, 2.0, (int(rng.integers(1, 7)), 2))
        b = rng.normal(0.0, 2.0, (int(rng.integers(1, 7)), 2))
        pairs.append((frechet(a, b), frechet_brute(a.tolist(), b.tolist())))
        mp = (rng.random((int(rng.integers(1, 6)), int(rng.integers(1, 6)))) > 0.5)
        mt = rng.random(mp.shape) > 0.5
        pairs.append((mean_iou(mp, mt), mean_iou_brute(mp.astype(int).tolist(),
                                                       mt.astype(int).tolist())))
        for got, want in pairs:
            worst = max(worst, abs(got - want) / max(abs(want), 1e-30))
    elapsed = time.monotonic() - start
    verdict(1, "metrics match brute-force oracles",
            worst < 1e-9 and elapsed < 5.0,
            f"worst rel dev {worst:.2e}, {elapsed:.2f}s over 200 instances")


def test_c02_frechet_fixtures():
    checks = [
        (frechet([(0, 0), (1, 1), (2, 0)], [(0, 0), (1, 1), (2, 0)]), 0.0),
        (frechet([(0, 0), (1, 0)], [(0, 1), (1, 1)]), 1.0),
        (frechet([(0, 0)], [(3, 4)]), 5.0),
        # 3x2 coupling table by hand: best path pairs the middle point of the
        # long curve with either endpoint of the short one, cost sqrt(5).
        (frechet([(0, 0), (2, 0), (4, 0)], [(0, 1), (4, 1)]), math.sqrt(5.0)),
    ]
    worst = max(abs(got - want) for got, want in checks)
    verdict(2, "Frechet fixtures exact", worst < 1e-12, f"worst abs dev {worst:.2e}")


def test_c03_flow_translation_recovery():
    start = time.monotonic()
    worst = 0.0
    for tx, ty in ((0.3, 0.4), (0.6, 0.8), (1.2, 1.6), (2.4, 3.2)):
        a, b = shifted_pair(256, 256, tx, ty, seed=7)
        f = lucas_kanade_flow(a, b, levels=3, window=15, iters=5)
        worst = max(worst, abs(f.u[f.valid].mean() - tx),
                    abs(f.v[f.valid].mean() - ty))
    flat = np.full((256, 256), 0.5)
    f0 = lucas_kanade_flow(flat, flat)
    all_invalid = not f0.valid.any()
    elapsed = time.monotonic() - start
    verdict(3, "flow recovers translations", worst < 0.25 and all_invalid
            and elapsed < 10.0,
            f"worst mean err {worst:.3f} px/axis, textureless invalid: "
            f"{all_invalid}, {elapsed:.1f}s")


def test_c04_backward_forward_consistency():
    a, b = shifted_pair(256, 256, 1.5, -0.7, seed=3)
    fwd = lucas_kanade_flow(a, b)
    bwd = lucas_kanade_flow(b, a)
    matched = consistency_check(fwd, bwd, 1.0)
    survive = matched.valid.sum() / max(fwd.valid.sum(), 1)
    r1 = texture(256, 256, seed=21)
    r2 = texture(256, 256, seed=77)
    fwd2 = lucas_kanade_flow(r1, r2)
    bwd2 = lucas_kanade_flow(r2, r1)
    mismatched = consistency_check(fwd2, bwd2, 1.0)
    leak = mismatched.valid.sum() / max(fwd2.valid.sum(), 1)
    verdict(4, "consistency keeps matched, drops mismatched",
            survive >= 0.95 and leak <= 0.05,
            f"matched survivors {survive:.1%}, mismatched survivors {leak:.1%}")


def test_c05_global_motion_on_rigid_scene():
    sun_sc = SimScenario(sun_elevation_deg=55.0)
    sx, sy = scenario_sun_pixel(sun_sc)
    direction = np.array([2.0, 1.0]) / math.hypot(2.0, 1.0)
    cx, cy = np.array([sx, sy]) - 90.0 * direction
    sc = SimScenario(
        sun_elevation_deg=55.0, seed=3,
        clouds=(CloudDisc(x0=cx, y0=cy, radius=50.0, vx=2.0, vy=1.0,
                          opacity=0.95),),
    )
    frames, _ = simulate_sky(sc, 6)
    prob = cloud_probability(frames[5])
    flow = consistency_check(
        lucas_kanade_flow(frames[4].gray(), frames[5].gray()),
        lucas_kanade_flow(frames[5].gray(), frames[4].gray()), 1.0)
    gm = global_motion(flow, prob, (sx, sy), MotionWeights(sigma_d=128.0))
    err_x = abs(gm.vx - 2.0) / 2.0
    err_y = abs(gm.vy - 1.0) / 1.0
    verdict(5, "global motion within 5% with confidence",
            err_x <= 0.05 and err_y <= 0.05 and gm.confidence > 0.5,
            f"V=({gm.vx:.3f},{gm.vy:.3f}) err=({err_x:.1%},{err_y:.1%}) "
            f"conf={gm.confidence:.2f}")


def test_c06_forecast_scenario_suite():
    start = time.monotonic()
    rows = []
    for name, sc in scenario_suite().items():
        frames, _ = simulate_sky(sc, 8)
        ref_s = 7 * sc.frame_dt_s
        prob = cloud_probability(frames[7])
        flow = consistency_check(
            lucas_kanade_flow(frames[6].gray(), frames[7].gray()),
            lucas_kanade_flow(frames[7].gray(), frames[6].gray()), 1.0)
        sun_px = scenario_sun_pixel(sc)
        gm = global_motion(flow, prob, sun_px,
                           MotionWeights(sigma_d=sc.size / 2.0))
        zone = build_prediction_zone(sun_px, gm, 1200.0, sc.frame_dt_s,
                                     0.15 * sc.size)
        prof = occlusion_profile(prob, zone, gm, 40)
        cs = sc.clear_sky.irradiance(sc.sun_elevation_deg)
        fc = forecast_irradiance(prof, [cs] * 40, alpha=sc.alpha)
        truth = exact_irradiance(sc, [ref_s + 30.0 * (k + 1) for k in range(40)])
        rows.append((
            name,
            mape(truth[:10], fc.values[:10]),
            mape(truth, fc.values),
            frechet(normalize_minmax(truth), normalize_minmax(fc.values)),
        ))
    elapsed = time.monotonic() - start
    for name, m5, m20, fr in rows:
        print(f"    {name:16s} mape5={m5:5.2f}%  mape20={m20:5.2f}%  "
              f"frechet={fr:.3f}")
    worst5 = max(r[1] for r in rows)
    worst20 = max(r[2] for r in rows)
    worst_fr = max(r[3] for r in rows)
    verdict(6, "forecast accuracy on 6-scenario suite",
            worst5 <= 10.0 and worst20 <= 25.0 and worst_fr <= 0.6
            and elapsed < 120.0,
            f"worst mape5 {worst5:.2f}% (<=10), worst mape20 {worst20:.2f}% "
            f"(<=25), worst frechet {worst_fr:.3f} (<=0.6), {elapsed:.0f}s")


# Five documented reference points spanning seasons and latitudes. The first
# is the published NREL SPA benchmark result (topocentric, includes ~0.02
# degrees of refraction); the rest were computed with the independent
# Meeus-series oracle in oracles.py and frozen.
SOLAR_REFERENCES = [
    ("2003-10-17T19:30:30", 39.742476, -105.1786, 194.34024, 39.88838),
    ("2000-03-20T16:00:00", 0.0, 0.0, 270.16414, 31.83054),
    ("2024-06-20T12:02:00", 51.4769, 0.0, 180.14351, 61.96120),
    ("2010-12-21T02:00:00", -33.8688, 151.2093, 351.21634, 79.45478),
    ("1995-07-04T21:00:00", 61.2181, -149.9003, 156.69099, 50.08086),
]


def test_c07_solar_position_references():
    worst_el = worst_az = 0.0
    for stamp, lat, lon, ref_az, ref_el in SOLAR_REFERENCES:
        t = datetime.fromisoformat(stamp).replace(tzinfo=timezone.utc)
        # guard the frozen table against the live oracle
        oaz, oel = meeus_sun(t, lat, lon)
        assert azimuth_delta(oaz, ref_az) < 0.05 and abs(oel - ref_el) < 0.05
        s = sun_position(t, lat, lon)
        worst_el = max(worst_el, abs(s.elevation_deg - ref_el))
        worst_az = max(worst_az, azimuth_delta(s.azimuth_deg, ref_az))
    verdict(7, "solar position vs published calculator",
            worst_el <= 0.5 and worst_az <= 0.5,
            f"worst elevation err {worst_el:.3f} deg, azimuth err "
            f"{worst_az:.3f} deg over 5 references")


# Haurwitz 1098 * sin(el) * exp(-0.057 / sin(el)), evaluated by hand.
HAURWITZ_REFERENCES = [(10.0, 137.3142), (30.0, 489.8496),
                       (60.0, 890.3251), (90.0, 1037.1643)]


def test_c08_clear_sky_analytic_and_fitted():
    model = ClearSkyModel()
    worst = 0.0
    for el, want in HAURWITZ_REFERENCES:
        s = math.sin(math.radians(el))
        assert abs(1098.0 * s * math.exp(-0.057 / s) - want) < 5e-4
        worst = max(worst, abs(model.irradiance(el) - want))
    rng = np.random.default_rng(31)
    els = rng.uniform(5.0, 85.0, 4000)
    vals = np.array([model.irradiance(e) for e in els])
    dip = rng.random(4000) < 0.3
    vals[dip] *= rng.uniform(0.2, 0.8, int(dip.sum()))
    fitted = fit_clear_sky(els, vals)
    worst_fit = max(
        abs(fitted.irradiance(c) - model.irradiance(c)) / model.irradiance(c)
        for c in np.arange(11.0, 84.0, 2.0)
    )
    verdict(8, "clear-sky analytic and fitted",
            worst <= 0.1 and worst_fit <= 0.05,
            f"analytic worst {worst:.4f} W/m2 (<=0.1), fitted worst "
            f"{worst_fit:.1%} (<=5%)")


def test_c09_counting_on_simulated_field():
    tiles = simulate_field(SimScenario(seed=404))
    preds = [count(t.mask) for t in tiles]
    truth = [t.true_count for t in tiles]
    mae = count_error(preds, truth)
    pairs_merged = sum(
        t.true_count - connected_components(t.mask).count for t in tiles
    )

    ys, xs = np.mgrid[0.0:60, 0.0:60]
    dumbbell = ((xs - 22.0) ** 2 + (ys - 30.0) ** 2 <= 100.0) | (
        (xs - 38.0) ** 2 + (ys - 30.0) ** 2 <= 100.0
    )
    dumbbell_count = count(dumbbell)

    rng = np.random.default_rng(55)
    never_merged = True
    for _ in range(500):
        m = rng.random((int(rng.integers(16, 44)), int(rng.integers(16, 44)))) \
            > rng.uniform(0.35, 0.8)
        before = connected_components(m).count
        after = connected_components(selective_watershed(m)).count
        if after < before:
            never_merged = False
            break
    verdict(9, "counting exact on field tiles",
            mae == 0.0 and dumbbell_count == 2 and never_merged
            and pairs_merged > 0,
            f"count MAE {mae} over {len(tiles)} tiles ({pairs_merged} berries "
            f"in merged pairs), dumbbell -> {dumbbell_count}, "
            f"never-merge over 500 masks: {never_merged}")


def _synthetic_weather_features(seed, n=1200):
    """Stationary diurnal weather series; y = a*irr + b*hum + c*dew + noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) * 300.0
    day = 2.0 * np.pi * t / 86400.0
    clear = 950.0 * np.clip(np.sin(day - np.pi / 2.0), 0.0, None)
    cloud = np.empty(n)
    cloud[0] = 0.7
    for i in range(1, n):
        cloud[i] = np.clip(0.92 * cloud[i - 1] + 0.08 * rng.uniform(0.3, 1.0)
                           + rng.normal(0.0, 0.03), 0.25, 1.0)
    irr = clear * cloud
    hum = np.clip(65.0 - 20.0 * np.sin(day - np.pi / 2.0)
                  + rng.normal(0.0, 3.0, n), 30.0, 95.0)
    dew = np.clip(52.0 + 5.0 * np.sin(day - np.pi / 2.0)
                  + rng.normal(0.0, 2.0, n), 40.0, 70.0)
    gust = rng.uniform(0.0, 25.0, n)
    wind = gust * rng.uniform(0.4, 0.9, n)
    wdir = rng.uniform(0.0, 360.0, n)
    wet = np.clip((hum - 40.0) / 0.6 + rng.normal(0.0, 5.0, n), 0.0, 100.0)
    X = np.column_stack([irr, hum, dew, gust, wind,
                         np.sin(np.radians(wdir)), np.cos(np.radians(wdir)),
                         wet])
    y = 45.0 + 0.03 * irr - 0.10 * hum + 0.20 * dew + rng.normal(0.0, 1.0, n)
    return X, y


def test_c10_temperature_models():
    start = time.monotonic()
    X, y = _synthetic_weather_features(424)
    forest_r2, forest_mae, mlp_r2 = [], [], []
    for train_idx, test_idx in temporal_cv_splits(y.size, folds=5,
                                                  test_fraction=0.3):
        fm = train_random_forest(X[train_idx], y[train_idx],
                                 ForestConfig(n_trees=50, seed=99))
        pred = predict_forest(fm, X[test_idx])
        forest_r2.append(r_squared(y[test_idx], pred))
        forest_mae.append(float(np.abs(y[test_idx] - pred).mean()))
        mm = train_mlp(X[train_idx], y[train_idx],
                       MlpConfig(hidden=(32, 16), learning_rate=3e-3,
                                 epochs=150, batch_size=32, seed=99))
        mlp_r2.append(r_squared(y[test_idx], predict_mlp(mm, X[test_idx])))
    full = train_random_forest(X, y, ForestConfig(n_trees=50, seed=99))
    first = rank_features(full, FEATURE_NAMES)[0]
    elapsed = time.monotonic() - start
    verdict(10, "temperature models on synthetic weather",
            np.mean(forest_r2) >= 0.9 and np.mean(forest_mae) <= 2.0
            and np.mean(mlp_r2) >= 0.85 and first == "irradiance_wm2"
            and elapsed < 60.0,
            f"forest R2 {np.mean(forest_r2):.3f} MAE {np.mean(forest_mae):.2f}F, "
            f"MLP R2 {np.mean(mlp_r2):.3f}, top feature {first}, {elapsed:.0f}s")


def test_c11_mlp_gradient_check():
    from test_mlp import finite_difference_check

    rng = np.random.default_rng(77)
    worst = 0.0
    for i in range(10):
        depth = int(rng.integers(1, 3))
        sizes = [int(rng.integers(2, 5))] + \
                [int(rng.integers(3, 9)) for _ in range(depth)] + [1]
        worst = max(worst, finite_difference_check(sizes, seed=1000 + i))
    verdict(11, "MLP gradients match finite differences", worst < 1e-4,
            f"max relative deviation {worst:.2e} over 10 networks")


def test_c12_run_determinism(tmp_path):
    wx = tmp_path / "wx"
    assert cli_main(["simulate", "--what", "weather", "--scenario", "clear",
                     "--samples", "250", "--out", str(wx)]) == 0
    assert cli_main(["train-temp", "--weather", str(wx / "weather.csv"),
                     "--target", str(wx / "berry_temp.csv"),
                     "--model", "forest", "--out", str(tmp_path / "f.json"),
                     "--seed", "5"]) == 0
    field = tmp_path / "field"
    assert cli_main(["simulate", "--what", "field", "--scenario", "clear",
                     "--seed", "2", "--out", str(field)]) == 0
    config = {
        "seed": 42,
        "sky": {"scenario": "multi_cloud", "frames": 8},
        "weather_csv": str(wx / "weather.csv"),
        "temp_model_file": str(tmp_path / "f.json"),
        "berries": {"masks_dir": str(field), "manifest": str(field / "tiles.csv"),
                    "cell_size_m": 20.0},
        "risk": {"temp_threshold_f": 60.0, "count_threshold": 25},
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    assert cli_main(["run", "--config", str(cfg),
                     "--out", str(tmp_path / "r1")]) == 0
    assert cli_main(["run", "--config", str(cfg),
                     "--out", str(tmp_path / "r2")]) == 0
    identical = all(
        (tmp_path / "r1" / name).read_bytes()
        == (tmp_path / "r2" / name).read_bytes()
        for name in ("forecast.csv", "report.json", "report.txt")
    )
    verdict(12, "bogwatch run is byte-identical", identical,
            "forecast.csv, report.json, report.txt compared across two runs")
