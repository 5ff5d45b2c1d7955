from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from bogwatch.errors import OrderingError, WeatherParseError
from bogwatch.weather import (
    FEATURE_NAMES,
    WEATHER_COLUMNS,
    WeatherRecord,
    aggregate_importances,
    feature_matrix,
    ingest_weather,
    temporal_cv_splits,
    write_weather_csv,
)


def record(ts, **kw):
    base = dict(
        timestamp=ts, ambient_temp_f=70.0, wind_speed_mph=5.0,
        gust_speed_mph=8.0, wind_dir_deg=180.0, rel_humidity_pct=55.0,
        dew_point_f=52.0, rain_in=0.0, wetness_pct=10.0, irradiance_wm2=600.0,
    )
    base.update(kw)
    return WeatherRecord(**base)


def t0(minutes=0):
    return datetime(2021, 7, 10, 12, 0, tzinfo=timezone.utc) + timedelta(minutes=minutes)


def write_csv(path, rows):
    lines = [",".join(WEATHER_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(v) for v in r))
    path.write_text("\n".join(lines) + "\n")


def csv_row(ts="2021-07-10T12:00:00Z", humidity="55", wind_dir="180"):
    return [ts, "70", "5", "8", wind_dir, humidity, "52", "0", "10", "600"]


class TestIngest:
    def test_well_formed(self, tmp_path):
        p = tmp_path / "w.csv"
        write_csv(p, [csv_row("2021-07-10T12:00:00Z"),
                      csv_row("2021-07-10T12:05:00Z"),
                      csv_row("2021-07-10T12:10:00Z")])
        recs = ingest_weather(p)
        assert len(recs) == 3
        assert recs[0].timestamp < recs[1].timestamp < recs[2].timestamp

    def test_out_of_range_rejected_with_line(self, tmp_path):
        p = tmp_path / "w.csv"
        write_csv(p, [csv_row(), csv_row("2021-07-10T12:05:00Z", humidity="140")])
        with pytest.raises(WeatherParseError, match="line 3"):
            ingest_weather(p)

    def test_malformed_rejected_with_line(self, tmp_path):
        p = tmp_path / "w.csv"
        write_csv(p, [csv_row(), ["garbage"] + ["x"] * 9])
        with pytest.raises(WeatherParseError, match="line 3"):
            ingest_weather(p)

    def test_shuffled_sorted_with_warning(self, tmp_path, caplog):
        p = tmp_path / "w.csv"
        write_csv(p, [csv_row("2021-07-10T12:10:00Z"),
                      csv_row("2021-07-10T12:00:00Z")])
        with caplog.at_level("WARNING"):
            recs = ingest_weather(p)
        assert recs[0].timestamp < recs[1].timestamp
        assert any("out of order" in m for m in caplog.messages)

    def test_duplicate_timestamps_error(self, tmp_path):
        p = tmp_path / "w.csv"
        write_csv(p, [csv_row(), csv_row()])
        with pytest.raises(OrderingError):
            ingest_weather(p)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("timestamp_utc,ambient_temp_f\n2021-07-10T12:00:00Z,70\n")
        with pytest.raises(WeatherParseError, match="missing columns"):
            ingest_weather(p)


def test_csv_roundtrip(tmp_path):
    rows = [record(t0(0)), record(t0(5), irradiance_wm2=712.25)]
    p = tmp_path / "w.csv"
    write_weather_csv(rows, p)
    back = ingest_weather(p)
    assert back[1].irradiance_wm2 == pytest.approx(712.25)
    assert back[0].timestamp == rows[0].timestamp


class TestFeatures:
    def test_matrix_shape_and_names(self):
        X, names = feature_matrix([record(t0()), record(t0(5))])
        assert X.shape == (2, len(FEATURE_NAMES))
        assert names == FEATURE_NAMES

    def test_wind_direction_circular(self):
        r1 = record(t0(), wind_dir_deg=359.0)
        r2 = record(t0(), wind_dir_deg=1.0)
        X, _ = feature_matrix([r1, r2])
        sin_i = FEATURE_NAMES.index("wind_dir_sin")
        cos_i = FEATURE_NAMES.index("wind_dir_cos")
        # nearly identical encodings across the 0/360 wrap
        assert abs(X[0, sin_i] - X[1, sin_i]) < 0.05
        assert abs(X[0, cos_i] - X[1, cos_i]) < 0.001

    def test_aggregate_importances_merges_pairs(self):
        imp = np.array([0.5, 0.1, 0.1, 0.05, 0.05, 0.1, 0.05, 0.05])
        agg = aggregate_importances(imp, FEATURE_NAMES)
        assert agg["wind_dir"] == pytest.approx(0.15)
        assert agg["irradiance_wm2"] == pytest.approx(0.5)


class TestTemporalSplits:
    def test_blocks_are_contiguous_and_sized(self):
        for train, test in temporal_cv_splits(100, folds=5, test_fraction=0.3):
            assert test.size == 30
            assert np.array_equal(test, np.arange(test[0], test[0] + 30))
            assert train.size == 70
            assert not np.intersect1d(train, test).size

    def test_folds_span_timeline(self):
        splits = temporal_cv_splits(100, folds=5, test_fraction=0.3)
        starts = [test[0] for _, test in splits]
        assert starts[0] == 0 and starts[-1] == 70
        assert starts == sorted(starts)

    def test_validation(self):
        with pytest.raises(ValueError):
            temporal_cv_splits(10, folds=5, test_fraction=1.5)
