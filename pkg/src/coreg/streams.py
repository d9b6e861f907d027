"""Multi-rate timestamped streams and the clock machinery that puts them
on one recording timebase.

Offset sign convention used throughout the toolkit: a stored offset is
``remote_clock - recording_clock`` at the probe time.  To map remote
timestamps onto the recording clock, apply the *inverse* of the fitted
offset model (see :meth:`ClockModel.inverse`); ``to_recording_clock``
itself always adds the model it is given.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateTimes, EmptyInput, TooFewMeasurements

STREAM_KINDS = ("gaze", "eeg", "input", "layout", "rating", "marker")

# On-the-wire value formats supported by the container.
CHANNEL_FORMATS = ("float32", "double64", "string")


@dataclass
class StreamInfo:
    """Static description of one acquisition stream."""

    stream_id: str
    kind: str
    channel_count: int
    nominal_rate_hz: float
    channel_labels: list[str] = field(default_factory=list)
    source_metadata: dict[str, str] = field(default_factory=dict)
    channel_format: str = "float32"

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.channel_format not in CHANNEL_FORMATS:
            raise ValueError(f"unknown channel format {self.channel_format!r}")
        if self.channel_count <= 0:
            raise ValueError("channel_count must be positive")
        if self.nominal_rate_hz < 0:
            raise ValueError("nominal_rate_hz must be >= 0")
        if self.channel_labels and len(self.channel_labels) != self.channel_count:
            raise ValueError("channel_labels length must equal channel_count")


@dataclass
class TimedSamples:
    """Sample block of one stream: timestamps plus per-sample channel values.

    ``values`` is an (n, channel_count) float array for numeric streams or a
    list of per-sample string lists for string streams.
    """

    stream: StreamInfo
    timestamps: np.ndarray
    values: np.ndarray | list[list[str]]

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.stream.channel_format != "string":
            dtype = np.float32 if self.stream.channel_format == "float32" else np.float64
            self.values = np.asarray(self.values, dtype=dtype)
            if self.values.ndim == 1:
                self.values = self.values.reshape(-1, 1)

    @property
    def n_samples(self) -> int:
        return len(self.timestamps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimedSamples):
            return NotImplemented
        if self.stream != other.stream:
            return False
        if not np.array_equal(self.timestamps, other.timestamps):
            return False
        if self.stream.channel_format == "string":
            return self.values == other.values
        return (
            self.values.dtype == other.values.dtype
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class ClockOffsetMeasurement:
    """One two-way probe result: remote minus recording clock at local_time."""

    local_time: float
    measured_offset: float

    def __post_init__(self):
        if not (np.isfinite(self.local_time) and np.isfinite(self.measured_offset)):
            raise ValueError("clock offset measurement must be finite")


@dataclass(frozen=True)
class ClockModel:
    """Linear offset model: offset(t) = intercept + slope * t."""

    intercept: float
    slope: float
    fit_residual_rms: float = 0.0
    n_points: int = 0

    def offset_at(self, t):
        return self.intercept + self.slope * np.asarray(t)

    def inverse(self) -> "ClockModel":
        """Model mapping the other direction (recording -> remote becomes
        remote -> recording).  Exact inverse of t + a + b*t."""
        return ClockModel(
            intercept=-self.intercept / (1.0 + self.slope),
            slope=-self.slope / (1.0 + self.slope),
            fit_residual_rms=self.fit_residual_rms,
            n_points=self.n_points,
        )


IDENTITY_CLOCK = ClockModel(0.0, 0.0)

# Fraction of probes discarded as outliers between the two fit passes.
TRIM_FRACTION = 0.20


def fit_clock_offset(measurements: list[ClockOffsetMeasurement]) -> ClockModel:
    """Robust least-squares line through (local_time, measured_offset).

    An initial fit is computed on all points, the 20% of points with the
    largest absolute residual are dropped, and the line is refit on the rest.
    """
    if len(measurements) < 2:
        raise TooFewMeasurements(f"need >= 2 probes, got {len(measurements)}")
    t = np.array([m.local_time for m in measurements])
    y = np.array([m.measured_offset for m in measurements])
    if np.ptp(t) == 0:
        raise DegenerateTimes("all probe times identical")

    slope, intercept = _ls_line(t, y)
    n_drop = int(TRIM_FRACTION * len(t))
    if n_drop and len(t) - n_drop >= 2:
        resid = np.abs(y - (intercept + slope * t))
        keep = np.argsort(resid)[: len(t) - n_drop]
        tk, yk = t[keep], y[keep]
        if np.ptp(tk) > 0:
            slope, intercept = _ls_line(tk, yk)
            t, y = tk, yk
    rms = float(np.sqrt(np.mean((y - (intercept + slope * t)) ** 2)))
    return ClockModel(float(intercept), float(slope), rms, len(t))


def _ls_line(x, y):
    xm, ym = x.mean(), y.mean()
    denom = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / denom
    return slope, ym - slope * xm


def default_gap_threshold(nominal_rate_hz: float) -> float:
    return max(1.0, 10.0 / nominal_rate_hz) if nominal_rate_hz > 0 else 1.0


def dejitter_timestamps(
    stamps, nominal_rate_hz: float, gap_threshold_s: float | None = None
) -> np.ndarray:
    """Replace jittered fixed-rate timestamps by per-segment regression lines.

    Segments are split where consecutive stamps differ by more than
    ``gap_threshold_s``; within each segment the stamps are replaced by the
    least-squares line of stamp vs. sample index.  Irregular streams
    (rate 0) pass through unchanged.
    """
    stamps = np.asarray(stamps, dtype=np.float64)
    if stamps.size == 0:
        raise EmptyInput("no timestamps")
    if nominal_rate_hz == 0:
        return stamps.copy()
    if gap_threshold_s is None:
        gap_threshold_s = default_gap_threshold(nominal_rate_hz)

    out = np.empty_like(stamps)
    boundaries = np.flatnonzero(np.diff(stamps) > gap_threshold_s) + 1
    for seg in np.split(np.arange(stamps.size), boundaries):
        if seg.size < 2:
            out[seg] = stamps[seg]
            continue
        idx = np.arange(seg.size, dtype=np.float64)
        slope, intercept = _ls_line(idx, stamps[seg])
        out[seg] = intercept + slope * idx
    return out


def to_recording_clock(samples: TimedSamples, model: ClockModel) -> TimedSamples:
    """Apply an offset model additively: t -> t + intercept + slope * t.

    Pass ``fitted_model.inverse()`` to map remote-clock stamps onto the
    recording clock (fitted offsets are remote - recording).
    """
    new_t = samples.timestamps + model.offset_at(samples.timestamps)
    return replace(samples, timestamps=new_t)
