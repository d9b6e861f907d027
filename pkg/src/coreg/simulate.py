"""Deterministic synthetic reading-session generator.

Produces a complete multi-stream session (layout, gaze scanpath, EEG,
input, ratings) with configurable injected effects (dwell-time bias, theta
amplitude gain on congruent words, N400 deflection on incongruent words)
plus per-stream clock imperfections, and the matching ground truth used as
the test oracle for every downstream stage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidConfig
from .gaze import BBox, LayoutSnapshot, Viewport, WordBox
from .streams import ClockOffsetMeasurement, StreamInfo, TimedSamples
from .xdf import SessionRecording, StreamRecord

GAZE_RATE = 300.0
EEG_RATE = 125.0
INPUT_RATE = 1000.0

EEG_CHANNELS = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7",
    "C3", "Cz", "C4", "T8", "P3", "Pz", "P4", "Oz",
]
PARIETAL = ("P3", "Pz", "P4")
FRONTAL = ("Fp1", "Fp2")

SACCADE_S = 0.030
THETA_TONE_HZ = 6.5
THETA_BURST_S = 0.600
N400_CENTER_S = 0.400
N400_SIGMA_S = 0.050
N400_WINDOW_S = (0.300, 0.500)
BLINK_S = 0.250
BLINK_AMPLITUDE_UV = 400.0

# Mean of a unit-peak Gaussian (center 400 ms, sd 50 ms) over the
# 300-500 ms window; the injected peak is scaled by 1/this so that the
# window-averaged N400 amplitude equals the configured value.
_N400_WINDOW_GAIN = (
    math.sqrt(2 * math.pi) * N400_SIGMA_S
    / (N400_WINDOW_S[1] - N400_WINDOW_S[0])
    * (0.5 * (math.erf(2 / math.sqrt(2)) - math.erf(-2 / math.sqrt(2))))
)

_VOCAB = [
    "the", "news", "reader", "media", "story", "view", "press", "report",
    "issue", "topic", "claim", "fact", "bias", "source", "frame", "poll",
]


@dataclass
class SimConfig:
    seed: int = 0
    duration_s: float = 60.0
    n_sentences: int = 12
    words_per_sentence: int = 5
    congruent_fraction: float = 0.5
    fixation_ms_means: tuple[float, float] = (230.0, 230.0)  # (congruent, incongruent)
    dwell_sigma: float = 0.2
    # wrap-up pause after each sentence; long enough that one word's EEG
    # analysis window never reaches into the next sentence, which would
    # correlate sentence-level features and distort permutation inference
    inter_sentence_pause_s: float = 0.8
    # noise-induced point-to-point velocity at 300 Hz must stay well below
    # the 1000 px/s I-VT threshold, hence the sub-pixel default
    gaze_noise_px: float = 0.5
    theta_gain: float = 0.0
    theta_amp_uv: float = 4.0
    n400_uv: float = 0.0
    eeg_noise: tuple[float, float] = (4.0, 2.0)  # (pink_noise_scale, alpha_amplitude)
    artifact_rate: float = 0.0
    clock: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {
            "gaze": (0.015, 30.0),
            "eeg": (-0.020, -20.0),
            "input": (0.0, 0.0),
            "layout": (0.0, 0.0),
            "rating": (0.0, 0.0),
        }
    )
    probe_period_s: float = 5.0
    probe_noise_s: float = 1e-4
    timestamp_jitter_ms: float = 0.5

    def validate(self):
        if self.duration_s <= 0:
            raise InvalidConfig("duration_s must be positive")
        if not (0.0 <= self.congruent_fraction <= 1.0):
            raise InvalidConfig("congruent_fraction must be in [0, 1]")
        if self.n_sentences < 1 or self.words_per_sentence < 1:
            raise InvalidConfig("need at least one sentence and one word per sentence")
        if min(self.fixation_ms_means) <= 0:
            raise InvalidConfig("fixation_ms_means must be positive")
        if self.gaze_noise_px < 0 or self.artifact_rate < 0:
            raise InvalidConfig("noise and artifact parameters must be non-negative")
        if self.inter_sentence_pause_s < 0:
            raise InvalidConfig("inter_sentence_pause_s must be non-negative")


@dataclass
class GroundTruth:
    fixations: list[dict] = field(default_factory=list)  # word_id, start, duration_ms
    sentence_congruence: dict[int, str] = field(default_factory=dict)
    onsets: list[dict] = field(default_factory=list)  # t, word_id, condition
    artifacts: list[dict] = field(default_factory=list)  # start, end, word_id
    clock: dict[str, dict] = field(default_factory=dict)
    ratings: list[dict] = field(default_factory=list)  # sentence_id, rating

    def to_json(self) -> str:
        d = asdict(self)
        d["sentence_congruence"] = {str(k): v for k, v in self.sentence_congruence.items()}
        return json.dumps(d, indent=1)

    @classmethod
    def from_json(cls, payload: str) -> "GroundTruth":
        d = json.loads(payload)
        return cls(
            fixations=d["fixations"],
            sentence_congruence={int(k): v for k, v in d["sentence_congruence"].items()},
            onsets=d["onsets"],
            artifacts=d["artifacts"],
            clock=d["clock"],
            ratings=d["ratings"],
        )


def export_ground_truth(gt: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(gt.to_json())


def load_ground_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return GroundTruth.from_json(fh.read())


# --------------------------------------------------------------------------
# layout
# --------------------------------------------------------------------------

def build_layout(cfg: SimConfig) -> LayoutSnapshot:
    """Single-column page of n_sentences x words_per_sentence word boxes."""
    words = []
    x, y = 40.0, 40.0
    page_right = 920.0
    word_id = 0
    for s in range(cfg.n_sentences):
        for i in range(cfg.words_per_sentence):
            text = _VOCAB[(s * cfg.words_per_sentence + i) % len(_VOCAB)]
            width = 13.0 * len(text) + 8.0
            if x + width > page_right:
                x, y = 40.0, y + 36.0
            words.append(
                WordBox(
                    word_id=word_id,
                    sentence_id=s,
                    text=text,
                    bbox=BBox(x, y, width, 22.0),
                    expectedness=None,
                )
            )
            x += width + 14.0
            word_id += 1
        x += 10.0  # sentence gap
    height = y + 60.0
    return LayoutSnapshot(t=0.0, words=tuple(words), viewport=Viewport(0.0, 0.0, 960.0, max(height, 600.0)))


def _with_expectedness(layout: LayoutSnapshot, congruence: dict[int, str], rng) -> LayoutSnapshot:
    words = []
    for w in layout.words:
        if congruence[w.sentence_id] == "congruent":
            exp = float(rng.uniform(0.5, 0.9))
        else:
            exp = float(rng.uniform(0.1, 0.5))
        words.append(WordBox(w.word_id, w.sentence_id, w.text, w.bbox, round(exp, 4)))
    return LayoutSnapshot(layout.t, tuple(words), layout.viewport)


# --------------------------------------------------------------------------
# session generation
# --------------------------------------------------------------------------

def simulate_session(cfg: SimConfig) -> tuple[SessionRecording, GroundTruth]:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    gt = GroundTruth()
    for kind, (off, drift) in cfg.clock.items():
        gt.clock[kind] = {"offset_s": off, "drift_ppm": drift}

    # sentence congruence assignment
    n_cong = int(round(cfg.congruent_fraction * cfg.n_sentences))
    order = rng.permutation(cfg.n_sentences)
    congruence = {
        int(s): ("congruent" if rank < n_cong else "incongruent")
        for rank, s in enumerate(order)
    }
    gt.sentence_congruence = dict(sorted(congruence.items()))

    layout = _with_expectedness(build_layout(cfg), congruence, rng)

    # reading plan: visit words in order, dwell ~ lognormal per condition
    mean_c, mean_i = cfg.fixation_ms_means
    sigma = cfg.dwell_sigma
    plan = []  # (word, start_s, dwell_s)
    t = 1.0
    deadline = cfg.duration_s - 1.5
    prev_sentence = None
    for w in layout.words:
        if prev_sentence is not None and w.sentence_id != prev_sentence:
            t += cfg.inter_sentence_pause_s
        mean_ms = mean_c if congruence[w.sentence_id] == "congruent" else mean_i
        mu = math.log(mean_ms) - sigma**2 / 2.0
        dwell_s = float(rng.lognormal(mu, sigma)) / 1000.0
        start = t + SACCADE_S
        if start + dwell_s > deadline:
            break
        plan.append((w, start, dwell_s))
        t = start + dwell_s
        prev_sentence = w.sentence_id
    if not plan:
        raise InvalidConfig("duration_s too short for a single fixation")

    for w, start, dwell_s in plan:
        gt.fixations.append(
            {"word_id": w.word_id, "start": round(start, 9), "duration_ms": round(dwell_s * 1000.0, 6)}
        )
        gt.onsets.append(
            {
                "t": round(start, 9),
                "word_id": w.word_id,
                "condition": congruence[w.sentence_id],
            }
        )

    gaze_ts, gaze_vals = _gaze_stream(cfg, plan, rng)
    eeg_vals, artifact_list = _eeg_stream(cfg, plan, congruence, rng)
    gt.artifacts = artifact_list

    streams = [
        _numeric_stream(
            cfg, "sim-gaze", "gaze", GAZE_RATE, ["x", "y", "valid"], gaze_ts, gaze_vals,
            {"device": "simulated-tracker"}, rng,
        ),
        _numeric_stream(
            cfg, "sim-eeg", "eeg", EEG_RATE, EEG_CHANNELS,
            np.arange(eeg_vals.shape[0]) / EEG_RATE, eeg_vals,
            {"montage": "10-20", "impedance_note": "below 20 kOhm (simulated)"}, rng,
        ),
        _input_stream(cfg, plan, rng),
        _layout_stream(cfg, layout, rng),
        _rating_stream(cfg, plan, congruence, gt, rng),
    ]
    header = "<info><version>1.0</version><origin>coreg-simulator</origin></info>"
    return SessionRecording(file_header_xml=header, streams=streams), gt


def _local_clock(cfg: SimConfig, kind: str, t: np.ndarray) -> np.ndarray:
    off, drift = cfg.clock.get(kind, (0.0, 0.0))
    return t + off + drift * 1e-6 * t


def _probes(cfg: SimConfig, kind: str, t_end: float, rng) -> list[ClockOffsetMeasurement]:
    off, drift = cfg.clock.get(kind, (0.0, 0.0))
    out = []
    t = 0.0
    while t <= t_end:
        noise = float(rng.normal(0.0, cfg.probe_noise_s)) if cfg.probe_noise_s else 0.0
        out.append(ClockOffsetMeasurement(t, off + drift * 1e-6 * t + noise))
        t += cfg.probe_period_s
    return out


def _numeric_stream(cfg, stream_id, kind, rate, labels, ts, vals, meta, rng) -> StreamRecord:
    info = StreamInfo(
        stream_id=stream_id,
        kind=kind,
        channel_count=len(labels),
        nominal_rate_hz=rate,
        channel_labels=list(labels),
        source_metadata=meta,
        channel_format="float32",
    )
    local = _local_clock(cfg, kind, np.asarray(ts))
    if cfg.timestamp_jitter_ms and rate > 0:
        local = local + rng.uniform(
            -cfg.timestamp_jitter_ms / 1000.0, cfg.timestamp_jitter_ms / 1000.0, size=local.shape
        )
        local = np.maximum.accumulate(local)  # keep stamps non-decreasing
    samples = TimedSamples(info, local, np.asarray(vals, dtype=np.float32))
    footer = f"<info><sample_count>{len(local)}</sample_count></info>"
    return StreamRecord(info, samples, _probes(cfg, kind, cfg.duration_s, rng), footer)


def _gaze_stream(cfg: SimConfig, plan, rng):
    n = int(round(cfg.duration_s * GAZE_RATE))
    t = np.arange(n) / GAZE_RATE
    # outside the reading plan the gaze sweeps a circle well above the
    # fixation velocity threshold so no spurious fixations are detected
    sweep_r, sweep_speed = 300.0, 2000.0
    omega = sweep_speed / sweep_r
    x = 480.0 + sweep_r * np.cos(omega * t)
    y = 400.0 + sweep_r * np.sin(omega * t)
    prev_x = prev_y = None
    for w, start, dwell in plan:
        wx, wy = _center(w)
        if prev_x is None:
            i_prev = max(int(round((start - SACCADE_S) * GAZE_RATE)), 0)
            prev_x, prev_y = float(x[i_prev]), float(y[i_prev])
        sacc = (t >= start - SACCADE_S) & (t < start)
        if sacc.any():
            frac = (t[sacc] - (start - SACCADE_S)) / SACCADE_S
            x[sacc] = prev_x + (wx - prev_x) * frac
            y[sacc] = prev_y + (wy - prev_y) * frac
        hold = (t >= start) & (t < start + dwell)
        x[hold], y[hold] = wx, wy
        prev_x, prev_y = wx, wy
    if cfg.gaze_noise_px:
        x = x + rng.normal(0.0, cfg.gaze_noise_px, size=n)
        y = y + rng.normal(0.0, cfg.gaze_noise_px, size=n)
    vals = np.column_stack([x, y, np.ones(n)])
    return t, vals


def _center(word: WordBox):
    return word.bbox.l + word.bbox.w / 2.0, word.bbox.t + word.bbox.h / 2.0


def _pink_noise(n, rng):
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = np.fft.irfft(spectrum * scale, n)
    sd = shaped.std()
    return shaped / sd if sd > 0 else shaped


def theta_burst_waveform(
    n_samples: int, rate: float, amplitude: float, phase: float = 0.0
) -> np.ndarray:
    """Tone at 6.5 Hz under a Hann envelope spanning the burst length.

    The phase is randomized per word by the simulator so the burst is
    induced (non-phase-locked) activity, as band-power markers assume.
    """
    k = np.arange(n_samples)
    env = np.hanning(n_samples)
    return amplitude * env * np.sin(2 * np.pi * THETA_TONE_HZ * k / rate + phase)


def n400_waveform(n_samples: int, rate: float, window_mean_uv: float) -> np.ndarray:
    """Gaussian deflection (center 400 ms, sd 50 ms) whose mean over the
    300-500 ms window equals ``window_mean_uv``."""
    t = np.arange(n_samples) / rate
    peak = window_mean_uv / _N400_WINDOW_GAIN
    return peak * np.exp(-((t - N400_CENTER_S) ** 2) / (2 * N400_SIGMA_S**2))


def _eeg_stream(cfg: SimConfig, plan, congruence, rng):
    n = int(round(cfg.duration_s * EEG_RATE))
    t = np.arange(n) / EEG_RATE
    pink_scale, alpha_amp = cfg.eeg_noise
    data = np.empty((len(EEG_CHANNELS), n))
    for c in range(len(EEG_CHANNELS)):
        data[c] = pink_scale * _pink_noise(n, rng)
        phase = rng.uniform(0, 2 * np.pi)
        data[c] += alpha_amp * np.sin(2 * np.pi * 10.0 * t + phase)

    parietal_w = np.array([1.0 if ch in PARIETAL else 0.15 for ch in EEG_CHANNELS])
    n400_w = np.array([1.0 if ch in PARIETAL else 0.3 for ch in EEG_CHANNELS])
    blink_w = np.array(
        [1.0 if ch in FRONTAL else (0.5 if ch.startswith("F") else 0.1) for ch in EEG_CHANNELS]
    )

    n_burst = int(round(THETA_BURST_S * EEG_RATE))
    n_bump = int(round(0.8 * EEG_RATE))
    artifacts = []
    for w, start, _dwell in plan:
        i0 = int(round(start * EEG_RATE))
        cond = congruence[w.sentence_id]
        amp = cfg.theta_amp_uv * (1.0 + cfg.theta_gain if cond == "congruent" else 1.0)
        burst = theta_burst_waveform(
            min(n_burst, n - i0), EEG_RATE, amp, phase=float(rng.uniform(0, 2 * np.pi))
        )
        data[:, i0 : i0 + len(burst)] += parietal_w[:, None] * burst[None, :]
        if cond == "incongruent" and cfg.n400_uv:
            bump = n400_waveform(min(n_bump, n - i0), EEG_RATE, cfg.n400_uv)
            data[:, i0 : i0 + len(bump)] += n400_w[:, None] * bump[None, :]
        if cfg.artifact_rate and rng.uniform() < cfg.artifact_rate:
            b_start = start + float(rng.uniform(0.0, 0.3))
            j0 = int(round(b_start * EEG_RATE))
            blink = BLINK_AMPLITUDE_UV * np.hanning(int(round(BLINK_S * EEG_RATE)))
            blink = blink[: n - j0]
            data[:, j0 : j0 + len(blink)] += blink_w[:, None] * blink[None, :]
            artifacts.append(
                {"start": round(b_start, 6), "end": round(b_start + BLINK_S, 6), "word_id": w.word_id}
            )
    return data.T, artifacts  # samples x channels for the container


def _input_stream(cfg: SimConfig, plan, rng) -> StreamRecord:
    n = int(round(cfg.duration_s * INPUT_RATE))
    t = np.arange(n) / INPUT_RATE
    codes = np.zeros((n, 1))
    # one synthetic key event at the end of each sentence
    seen = set()
    for w, start, dwell in plan:
        if w.sentence_id not in seen:
            seen.add(w.sentence_id)
            idx = min(int(round((start + dwell) * INPUT_RATE)), n - 1)
            codes[idx, 0] = 1.0
    return _numeric_stream(
        cfg, "sim-input", "input", INPUT_RATE, ["event_code"], t, codes,
        {"device": "simulated-hid"}, rng,
    )


def _layout_stream(cfg: SimConfig, layout: LayoutSnapshot, rng) -> StreamRecord:
    info = StreamInfo(
        stream_id="sim-layout",
        kind="layout",
        channel_count=1,
        nominal_rate_hz=0.0,
        channel_labels=["snapshot_json"],
        source_metadata={"schema": "layout-snapshot-v1"},
        channel_format="string",
    )
    ts = _local_clock(cfg, "layout", np.array([layout.t]))
    samples = TimedSamples(info, ts, [[layout.to_json()]])
    return StreamRecord(info, samples, _probes(cfg, "layout", cfg.duration_s, rng), "")


def _rating_stream(cfg: SimConfig, plan, congruence, gt: GroundTruth, rng) -> StreamRecord:
    info = StreamInfo(
        stream_id="sim-rating",
        kind="rating",
        channel_count=2,
        nominal_rate_hz=0.0,
        channel_labels=["sentence_id", "agreement"],
        source_metadata={"scale": "1-5 agreement"},
        channel_format="float32",
    )
    read_sentences = sorted({w.sentence_id for w, _s, _d in plan})
    t_base = plan[-1][1] + plan[-1][2] + 0.5
    ts, vals = [], []
    for i, sid in enumerate(read_sentences):
        rating = 5 if congruence[sid] == "congruent" else 1
        ts.append(t_base + 0.4 * i)
        vals.append([float(sid), float(rating)])
        gt.ratings.append({"sentence_id": sid, "rating": rating})
    samples = TimedSamples(info, _local_clock(cfg, "rating", np.array(ts)), np.array(vals, dtype=np.float32))
    return StreamRecord(info, samples, _probes(cfg, "rating", cfg.duration_s, rng), "")
