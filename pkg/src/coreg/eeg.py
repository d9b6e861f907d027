"""EEG preprocessing, epoching around word-fixation onsets, and the two
marker features: theta band power and ERP/N400 amplitude."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import EmptyCondition, InvalidBand, WindowTooShort

THETA_BAND = (5.0, 8.0)
DEFAULT_BROADBAND = (0.1, 40.0)
DEFAULT_EPOCH_PRE_MS = 200.0
DEFAULT_EPOCH_POST_MS = 800.0
DEFAULT_BASELINE_MS = (-200.0, 0.0)
# 0-600 ms would leave only one 64-sample Welch segment at 125 Hz, so the
# pipeline default analysis window runs to 768 ms (96 samples, 2 segments).
DEFAULT_THETA_WINDOW_MS = (0.0, 768.0)
DEFAULT_N400_WINDOW_MS = (300.0, 500.0)
DEFAULT_ARTIFACT_P2P_UV = 150.0
PARIETAL_LABELS = ("P3", "Pz", "P4")

WELCH_NPERSEG = 64


@dataclass
class EegRecording:
    """Continuous multichannel EEG in microvolts; data is channels x time."""

    channels: list[str]
    rate_hz: float
    data: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channels):
            raise ValueError("data must be (n_channels, n_samples)")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) / self.rate_hz


@dataclass
class Epoch:
    onset_t: float
    pre_ms: float
    post_ms: float
    rate_hz: float
    channels: list[str]
    data: np.ndarray  # channels x time, baseline-corrected
    condition_tag: str | None = None
    word_id: int | None = None

    def times_ms(self) -> np.ndarray:
        return -self.pre_ms + np.arange(self.data.shape[1]) / self.rate_hz * 1000.0

    def channel_index(self, labels) -> list[int]:
        return [self.channels.index(lab) for lab in labels if lab in self.channels]


@dataclass
class BandPowerFeature:
    word_id: int | None
    channel_power_uv2: dict[str, float]
    parietal_mean: float


@dataclass
class ErpResult:
    condition: str
    n_epochs: int
    channels: list[str]
    rate_hz: float
    pre_ms: float
    mean_waveform: np.ndarray  # channels x time
    n400_amplitude_uv: float


def bandpass_filter(rec: EegRecording, low_hz: float, high_hz: float, order: int = 4) -> EegRecording:
    """Zero-phase Butterworth band-pass (high-pass omitted when low is 0)."""
    nyq = rec.rate_hz / 2.0
    if not (0 <= low_hz < high_hz < nyq):
        raise InvalidBand(f"band ({low_hz}, {high_hz}) invalid at rate {rec.rate_hz}")
    if low_hz == 0:
        sos = signal.butter(order, high_hz / nyq, btype="lowpass", output="sos")
    else:
        sos = signal.butter(order, [low_hz / nyq, high_hz / nyq], btype="bandpass", output="sos")
    filtered = signal.sosfiltfilt(sos, rec.data, axis=1)
    return EegRecording(rec.channels, rec.rate_hz, filtered, rec.t0)


def epoch_around_onsets(
    rec: EegRecording,
    onsets: list[tuple[float, int | None, str | None]],
    pre_ms: float = DEFAULT_EPOCH_PRE_MS,
    post_ms: float = DEFAULT_EPOCH_POST_MS,
    baseline_ms: tuple[float, float] = DEFAULT_BASELINE_MS,
) -> tuple[list[Epoch], list[dict]]:
    """Cut baseline-corrected epochs around (t, word_id, condition) onsets.

    Onsets whose window falls outside the recording are excluded and listed
    in the report with reason ``OutOfBounds``.
    """
    if not (-pre_ms <= baseline_ms[0] <= baseline_ms[1] <= post_ms):
        raise ValueError("baseline window must lie within the epoch window")
    rate = rec.rate_hz
    n_pre = int(round(pre_ms / 1000.0 * rate))
    n_post = int(round(post_ms / 1000.0 * rate))
    epochs: list[Epoch] = []
    exclusions: list[dict] = []
    for onset_t, word_id, tag in onsets:
        center = int(round((onset_t - rec.t0) * rate))
        lo, hi = center - n_pre, center + n_post
        if lo < 0 or hi > rec.n_samples:
            exclusions.append({"onset_t": onset_t, "word_id": word_id, "reason": "OutOfBounds"})
            continue
        data = rec.data[:, lo:hi].copy()
        times_ms = (np.arange(lo, hi) - center) / rate * 1000.0
        bmask = (times_ms >= baseline_ms[0]) & (times_ms <= baseline_ms[1])
        if bmask.any():
            data -= data[:, bmask].mean(axis=1, keepdims=True)
        epochs.append(
            Epoch(
                onset_t=onset_t,
                pre_ms=pre_ms,
                post_ms=post_ms,
                rate_hz=rate,
                channels=rec.channels,
                data=data,
                condition_tag=tag,
                word_id=word_id,
            )
        )
    return epochs, exclusions


def reject_artifacts(
    epochs: list[Epoch], peak_to_peak_uv: float = DEFAULT_ARTIFACT_P2P_UV
) -> tuple[list[Epoch], list[dict]]:
    """Drop epochs where any channel's peak-to-peak span exceeds the threshold."""
    if peak_to_peak_uv <= 0:
        raise ValueError("peak_to_peak_uv must be positive")
    kept, rejected = [], []
    for i, ep in enumerate(epochs):
        p2p = ep.data.max(axis=1) - ep.data.min(axis=1)
        if (p2p > peak_to_peak_uv).any():
            worst = int(np.argmax(p2p))
            rejected.append(
                {
                    "epoch_index": i,
                    "onset_t": ep.onset_t,
                    "word_id": ep.word_id,
                    "channel": ep.channels[worst],
                    "peak_to_peak_uv": float(p2p[worst]),
                }
            )
        else:
            kept.append(ep)
    return kept, rejected


def band_power_welch(
    x: np.ndarray, rate_hz: float, band: tuple[float, float], nperseg: int = WELCH_NPERSEG
) -> np.ndarray:
    """Welch band power (Hann segments, 50% overlap) integrated over the band.

    The integration includes every frequency bin whose center lies within
    half the Hann main-lobe bandwidth of the band, which keeps a tone at the
    band edge fully accounted for instead of losing its leakage.
    """
    n = x.shape[-1]
    if n < nperseg + nperseg // 2:
        raise WindowTooShort(
            f"window of {n} samples yields fewer than 2 Welch segments of {nperseg}"
        )
    freqs, psd = signal.welch(
        x, fs=rate_hz, window="hann", nperseg=nperseg, noverlap=nperseg // 2, axis=-1
    )
    df = freqs[1] - freqs[0]
    half_lobe = 1.5 * df / 2.0
    mask = (freqs >= band[0] - half_lobe) & (freqs <= band[1] + half_lobe)
    return psd[..., mask].sum(axis=-1) * df


def induced_epochs(epochs: list[Epoch]) -> list[Epoch]:
    """Subtract the grand-average evoked waveform from every epoch.

    Removing the phase-locked component before band-power estimation keeps
    transient ERP deflections such as the N400 from leaking broadband
    energy into narrow-band oscillatory measures.  The grand average is
    used rather than per-condition averages so the subtraction does not
    depend on condition labels; condition-specific evoked residue then
    enters both groups with equal band power and cancels in comparisons.
    """
    if not epochs:
        return []
    mean = np.mean([ep.data for ep in epochs], axis=0)
    out = []
    for ep in epochs:
        out.append(
            Epoch(
                onset_t=ep.onset_t,
                pre_ms=ep.pre_ms,
                post_ms=ep.post_ms,
                rate_hz=ep.rate_hz,
                channels=ep.channels,
                data=ep.data - mean,
                condition_tag=ep.condition_tag,
                word_id=ep.word_id,
            )
        )
    return out


def theta_band_power(
    epoch: Epoch,
    band: tuple[float, float] = THETA_BAND,
    analysis_window_ms: tuple[float, float] = DEFAULT_THETA_WINDOW_MS,
    parietal_labels=PARIETAL_LABELS,
) -> BandPowerFeature:
    """Theta power per channel over the post-onset analysis window."""
    times = epoch.times_ms()
    mask = (times >= analysis_window_ms[0]) & (times < analysis_window_ms[1])
    segment = epoch.data[:, mask]
    powers = band_power_welch(segment, epoch.rate_hz, band)
    per_channel = {ch: float(p) for ch, p in zip(epoch.channels, powers)}
    idx = epoch.channel_index(parietal_labels)
    parietal = float(np.mean(powers[idx])) if idx else float(np.mean(powers))
    return BandPowerFeature(epoch.word_id, per_channel, parietal)


def n400_amplitude(
    epoch_or_waveform: np.ndarray,
    times_ms: np.ndarray,
    channels: list[str],
    window_ms: tuple[float, float] = DEFAULT_N400_WINDOW_MS,
    n400_channels=PARIETAL_LABELS,
) -> float:
    """Mean amplitude over the N400 window and channel set."""
    tmask = (times_ms >= window_ms[0]) & (times_ms <= window_ms[1])
    idx = [channels.index(c) for c in n400_channels if c in channels]
    if not idx:
        idx = list(range(len(channels)))
    return float(epoch_or_waveform[np.ix_(idx, np.flatnonzero(tmask))].mean())


def epoch_n400(epoch: Epoch, window_ms=DEFAULT_N400_WINDOW_MS, n400_channels=PARIETAL_LABELS) -> float:
    return n400_amplitude(epoch.data, epoch.times_ms(), epoch.channels, window_ms, n400_channels)


def compute_erp(
    epochs: list[Epoch],
    conditions: list[str] | None = None,
    n400_window_ms: tuple[float, float] = DEFAULT_N400_WINDOW_MS,
    n400_channels=PARIETAL_LABELS,
) -> tuple[dict[str, ErpResult], np.ndarray | None]:
    """Per-condition average waveforms plus the incongruent-congruent
    difference wave (None when either condition is absent)."""
    groups: dict[str, list[Epoch]] = {}
    for ep in epochs:
        groups.setdefault(ep.condition_tag or "all", []).append(ep)
    if conditions is None:
        conditions = sorted(groups)
    results: dict[str, ErpResult] = {}
    for cond in conditions:
        members = groups.get(cond, [])
        if not members:
            raise EmptyCondition(f"no epochs for condition {cond!r}")
        mean_wave = np.mean([ep.data for ep in members], axis=0)
        ref = members[0]
        results[cond] = ErpResult(
            condition=cond,
            n_epochs=len(members),
            channels=ref.channels,
            rate_hz=ref.rate_hz,
            pre_ms=ref.pre_ms,
            mean_waveform=mean_wave,
            n400_amplitude_uv=n400_amplitude(
                mean_wave, ref.times_ms(), ref.channels, n400_window_ms, n400_channels
            ),
        )
    difference = None
    if "incongruent" in results and "congruent" in results:
        difference = results["incongruent"].mean_waveform - results["congruent"].mean_waveform
    return results, difference
