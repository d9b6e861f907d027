"""Clock-offset regression, dejittering, and clock mapping."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coreg.errors import DegenerateTimes, EmptyInput, TooFewMeasurements
from coreg.streams import (
    ClockModel,
    ClockOffsetMeasurement,
    IDENTITY_CLOCK,
    StreamInfo,
    TimedSamples,
    default_gap_threshold,
    dejitter_timestamps,
    fit_clock_offset,
    to_recording_clock,
)


def _probes(times, offsets):
    return [ClockOffsetMeasurement(t, o) for t, o in zip(times, offsets)]


class TestFitClockOffset:
    def test_constant_offset(self):
        t = np.arange(10.0)
        model = fit_clock_offset(_probes(t, np.full(10, 0.5)))
        assert abs(model.intercept - 0.5) < 1e-9
        assert abs(model.slope) < 1e-9

    def test_linear_drift_recovered(self):
        t = np.arange(0.0, 101.0)
        model = fit_clock_offset(_probes(t, 0.5 + 5e-5 * t))
        assert abs(model.slope - 5e-5) < 1e-9
        assert abs(model.intercept - 0.5) < 1e-9
        assert model.fit_residual_rms < 1e-12

    def test_single_measurement_rejected(self):
        with pytest.raises(TooFewMeasurements):
            fit_clock_offset(_probes([1.0], [0.5]))

    def test_identical_times_rejected(self):
        with pytest.raises(DegenerateTimes):
            fit_clock_offset(_probes([2.0, 2.0, 2.0], [0.1, 0.2, 0.3]))

    def test_outlier_trimmed(self):
        t = np.arange(20.0)
        offsets = 0.3 + 1e-5 * t
        offsets[7] += 2.0  # one wildly late probe
        model = fit_clock_offset(_probes(t, offsets))
        assert abs(model.intercept - 0.3) < 1e-9
        assert abs(model.slope - 1e-5) < 1e-9
        assert model.n_points == 16  # 20% trimmed

    @given(
        intercept=st.floats(-10, 10),
        slope=st.floats(-1e-2, 1e-2),
        n=st.integers(5, 40),
    )
    @settings(max_examples=60, deadline=None)
    def test_exact_line_recovered(self, intercept, slope, n):
        t = np.linspace(0.0, 120.0, n)
        model = fit_clock_offset(_probes(t, intercept + slope * t))
        assert abs(model.intercept - intercept) < 1e-9 * max(1.0, abs(intercept))
        assert abs(model.slope - slope) < 1e-9


class TestDejitter:
    def test_regular_grid_unchanged(self):
        stamps = 3.0 + np.arange(900) / 300.0
        out = dejitter_timestamps(stamps, 300.0)
        assert np.max(np.abs(out - stamps)) < 1e-12

    def test_jitter_removed(self):
        rng = np.random.default_rng(7)
        grid = 10.0 + np.arange(3000) / 300.0
        jittered = grid + rng.uniform(-0.002, 0.002, size=grid.size)
        out = dejitter_timestamps(np.sort(jittered), 300.0)
        rms = np.sqrt(np.mean((out - grid) ** 2))
        assert rms < 0.2e-3

    def test_gap_splits_segments(self):
        a = np.arange(300) / 300.0
        b = a[-1] + 2.0 + np.arange(300) / 300.0
        out = dejitter_timestamps(np.concatenate([a, b]), 300.0, gap_threshold_s=1.0)
        # the gap survives; each side is fit independently
        assert out[300] - out[299] > 1.5
        assert np.max(np.abs(out[:300] - a)) < 1e-9
        assert np.max(np.abs(out[300:] - b)) < 1e-9

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            dejitter_timestamps(np.array([]), 300.0)

    def test_irregular_rate_passthrough(self):
        stamps = np.array([0.1, 0.5, 3.0])
        assert np.array_equal(dejitter_timestamps(stamps, 0.0), stamps)

    def test_default_gap_threshold(self):
        assert default_gap_threshold(300.0) == 1.0
        assert default_gap_threshold(2.0) == 5.0

    @given(
        rate=st.floats(10.0, 1000.0),
        n=st.integers(3, 200),
        jitter_ms=st.floats(0.0, 1.0),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=50, deadline=None)
    def test_output_affine_per_segment_and_idempotent(self, rate, n, jitter_ms, seed):
        rng = np.random.default_rng(seed)
        grid = np.arange(n) / rate
        stamps = np.sort(grid + rng.uniform(-jitter_ms, jitter_ms, n) / 1000.0)
        out = dejitter_timestamps(stamps, rate)
        # single segment: second differences vanish (affine in index)
        if n >= 3 and np.all(np.diff(stamps) <= default_gap_threshold(rate)):
            assert np.max(np.abs(np.diff(out, 2))) < 1e-9 / rate
        again = dejitter_timestamps(out, rate)
        assert np.max(np.abs(again - out)) < 1e-9


class TestToRecordingClock:
    def _samples(self, stamps):
        info = StreamInfo("s", "marker", 1, 0.0)
        return TimedSamples(info, np.asarray(stamps), np.zeros((len(stamps), 1)))

    def test_identity(self):
        s = self._samples([1.0, 2.0, 3.0])
        out = to_recording_clock(s, IDENTITY_CLOCK)
        assert np.array_equal(out.timestamps, s.timestamps)

    def test_constant_shift(self):
        out = to_recording_clock(self._samples([1.0, 2.0]), ClockModel(-0.5, 0.0))
        assert np.allclose(out.timestamps, [0.5, 1.5])

    def test_fitted_drift_inverts_remote_grid(self):
        # remote clock = recording + 0.5 + 5e-5 * t; probes measured on the
        # recording clock, stamps carried on the remote clock
        rec_grid = np.arange(0.0, 100.0, 0.1)
        remote_grid = rec_grid + 0.5 + 5e-5 * rec_grid
        probe_t = np.arange(0.0, 101.0, 5.0)
        model = fit_clock_offset(_probes(probe_t, 0.5 + 5e-5 * probe_t))
        out = to_recording_clock(self._samples(remote_grid), model.inverse())
        assert np.max(np.abs(out.timestamps - rec_grid)) < 1e-6

    @given(
        slope=st.floats(-0.5, 0.5),
        intercept=st.floats(-5, 5),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=40, deadline=None)
    def test_order_preserving(self, slope, intercept, seed):
        rng = np.random.default_rng(seed)
        stamps = np.sort(rng.uniform(0, 100, 20))
        out = to_recording_clock(self._samples(stamps), ClockModel(intercept, slope))
        assert np.all(np.diff(out.timestamps) >= 0)

    def test_inverse_composes_to_identity(self):
        model = ClockModel(0.25, 3e-4)
        t = np.linspace(0, 50, 11)
        fwd = t + model.offset_at(t)
        back = fwd + model.inverse().offset_at(fwd)
        assert np.max(np.abs(back - t)) < 1e-9
