from datetime import datetime, timedelta

import numpy as np
import pytest

from bogwatch.errors import NoSunError, ShapeError
from bogwatch.flow import GlobalMotion
from bogwatch.forecast import (
    IrradianceSeries,
    OcclusionProfile,
    PredictionZone,
    build_prediction_zone,
    forecast_irradiance,
    occlusion_profile,
)
from bogwatch.raster import Raster


def gm(vx, vy, conf=1.0):
    return GlobalMotion(vx, vy, conf)


class TestBuildZone:
    def test_axis_and_length(self):
        z = build_prediction_zone((100.0, 100.0), gm(2.0, 0.0), 600.0, 5.0, 30.0)
        assert z.axis == pytest.approx((-1.0, 0.0))
        assert z.length == pytest.approx(240.0)
        assert not z.degenerate

    def test_static_degenerates_to_disc(self):
        z = build_prediction_zone((100.0, 100.0), gm(0.0, 0.0), 600.0, 5.0, 30.0)
        assert z.degenerate and z.width == 30.0

    def test_zero_horizon(self):
        z = build_prediction_zone((100.0, 100.0), gm(2.0, 0.0), 0.0, 5.0, 30.0)
        assert z.length == 0.0

    def test_no_sun(self):
        with pytest.raises(NoSunError):
            build_prediction_zone(None, gm(2.0, 0.0), 600.0, 5.0, 30.0)

    def test_zone_validation(self):
        with pytest.raises(ValueError):
            PredictionZone((0, 0), (1.0, 0.0), 10.0, 0.0)


class TestOcclusionProfile:
    def test_zero_probability_zero_profile(self):
        prob = Raster(np.zeros((200, 200)))
        z = build_prediction_zone((100.0, 100.0), gm(1.0, 0.0), 300.0, 5.0, 20.0)
        prof = occlusion_profile(prob, z, gm(1.0, 0.0), 10)
        assert prof.occlusion == (0.0,) * 10

    def test_block_arrival_time(self):
        # Opaque block whose near edge is 120 px upstream (+x side), cloud
        # speed 2 px/frame toward the sun, frame_dt 5 s: occlusion should
        # switch on around 300 s of horizon.
        h = w = 400
        p = np.zeros((h, w))
        p[:, 320:] = 1.0  # sun at x=200; near edge 120 px upstream of the sun
        prob = Raster(p)
        motion = gm(-2.0, 0.0)  # cloud moves toward -x, so upstream is +x
        z = build_prediction_zone((200.0, 200.0), motion, 600.0, 5.0, 40.0)
        prof = occlusion_profile(prob, z, motion, 20)  # steps of 30 s
        occ = np.array(prof.occlusion)
        # before 270 s: clear; 330-480 s: fully occluded (beyond ~500 s the
        # slices leave the image and read 0 with zero confidence)
        assert occ[:8].max() < 0.1
        assert occ[11:16].min() > 0.9
        assert prof.confidence[-1] == 0.0

    def test_degenerate_disc_reads_constant(self):
        prob = Raster(np.full((100, 100), 0.4))
        z = build_prediction_zone((50.0, 50.0), gm(0.0, 0.0), 600.0, 5.0, 20.0)
        prof = occlusion_profile(prob, z, gm(0.0, 0.0, 0.8), 5)
        assert prof.occlusion == pytest.approx((0.4,) * 5)
        assert prof.confidence == pytest.approx((0.8,) * 5)

    def test_out_of_image_slices_have_zero_confidence(self):
        prob = Raster(np.ones((50, 50)))
        motion = gm(-5.0, 0.0)
        z = build_prediction_zone((25.0, 25.0), motion, 600.0, 5.0, 10.0)
        prof = occlusion_profile(prob, z, motion, 10)
        assert prof.confidence[-1] == 0.0
        assert prof.occlusion[-1] == 0.0

    def test_steps_validation(self):
        prob = Raster(np.zeros((10, 10)))
        z = build_prediction_zone((5.0, 5.0), gm(1.0, 0.0), 60.0, 5.0, 4.0)
        with pytest.raises(ValueError):
            occlusion_profile(prob, z, gm(1.0, 0.0), 0)


class TestForecastIrradiance:
    def test_zero_occlusion_returns_clear_sky(self):
        prof = OcclusionProfile((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        out = forecast_irradiance(prof, [800.0, 810.0, 820.0])
        assert out.values.tolist() == [800.0, 810.0, 820.0]

    def test_full_occlusion_attenuates(self):
        prof = OcclusionProfile((1.0,), (1.0,))
        out = forecast_irradiance(prof, [800.0], alpha=0.75)
        assert out.values[0] == pytest.approx(200.0)

    def test_alpha_zero_ignores_occlusion(self):
        prof = OcclusionProfile((1.0, 0.5), (1.0, 1.0))
        out = forecast_irradiance(prof, [700.0, 700.0], alpha=0.0)
        assert out.values.tolist() == [700.0, 700.0]

    def test_length_mismatch(self):
        prof = OcclusionProfile((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(ShapeError):
            forecast_irradiance(prof, [800.0])

    def test_timestamps(self):
        t0 = datetime(2021, 7, 1, 15, 0)
        prof = OcclusionProfile((0.1, 0.2), (1.0, 1.0))
        out = forecast_irradiance(prof, [500.0, 500.0], start=t0, step_seconds=30.0)
        assert out.timestamps[0] == t0 + timedelta(seconds=30)
        assert out.timestamps[1] == t0 + timedelta(seconds=60)

    def test_bounded_by_clear_sky(self):
        rng = np.random.default_rng(8)
        occ = tuple(rng.random(12))
        prof = OcclusionProfile(occ, (1.0,) * 12)
        cs = rng.uniform(100.0, 1000.0, 12)
        out = forecast_irradiance(prof, cs, alpha=0.6)
        assert (out.values <= cs + 1e-12).all() and (out.values >= 0.0).all()

    def test_monotone_in_occlusion(self):
        cs = [600.0] * 5
        lo = forecast_irradiance(OcclusionProfile((0.2,) * 5, (1.0,) * 5), cs)
        hi = forecast_irradiance(OcclusionProfile((0.7,) * 5, (1.0,) * 5), cs)
        assert (hi.values <= lo.values).all()


class TestIrradianceSeries:
    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            IrradianceSeries([datetime(2021, 1, 1)], [-1.0])

    def test_rejects_nonuniform_spacing(self):
        t0 = datetime(2021, 1, 1)
        stamps = [t0, t0 + timedelta(seconds=30), t0 + timedelta(seconds=90)]
        with pytest.raises(ValueError):
            IrradianceSeries(stamps, [1.0, 2.0, 3.0])

    def test_rejects_decreasing(self):
        t0 = datetime(2021, 1, 1)
        with pytest.raises(ValueError):
            IrradianceSeries([t0, t0], [1.0, 2.0])
