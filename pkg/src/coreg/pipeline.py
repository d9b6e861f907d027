"""End-to-end analysis of one recorded session: clock alignment, fixation
detection and AOI scoring, EEG epoching and marker extraction, feature
table assembly, and the statistical comparisons."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import eeg as eegmod
from . import gaze as gazemod
from . import stats as statsmod
from .errors import MissingStream
from .streams import IDENTITY_CLOCK, fit_clock_offset, dejitter_timestamps, to_recording_clock
from .xdf import SessionRecording, StreamRecord


@dataclass
class AnalysisConfig:
    velocity_threshold_px_s: float = gazemod.DEFAULT_VELOCITY_THRESHOLD_PX_S
    min_fixation_ms: float = gazemod.DEFAULT_MIN_DURATION_MS
    bridge_gap_ms: float = gazemod.DEFAULT_BRIDGE_GAP_MS
    aoi_slack_px: float = gazemod.DEFAULT_AOI_SLACK_PX
    filter_band_hz: tuple[float, float] = eegmod.DEFAULT_BROADBAND
    epoch_pre_ms: float = eegmod.DEFAULT_EPOCH_PRE_MS
    epoch_post_ms: float = eegmod.DEFAULT_EPOCH_POST_MS
    baseline_ms: tuple[float, float] = eegmod.DEFAULT_BASELINE_MS
    theta_band_hz: tuple[float, float] = eegmod.THETA_BAND
    theta_window_ms: tuple[float, float] = eegmod.DEFAULT_THETA_WINDOW_MS
    n400_window_ms: tuple[float, float] = eegmod.DEFAULT_N400_WINDOW_MS
    artifact_p2p_uv: float = eegmod.DEFAULT_ARTIFACT_P2P_UV
    parietal_labels: tuple[str, ...] = eegmod.PARIETAL_LABELS
    n_permutations: int = 2000
    k_sentences: int = 3
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "velocity_threshold_px_s": self.velocity_threshold_px_s,
            "min_fixation_ms": self.min_fixation_ms,
            "bridge_gap_ms": self.bridge_gap_ms,
            "aoi_slack_px": self.aoi_slack_px,
            "filter_band_hz": list(self.filter_band_hz),
            "epoch_pre_ms": self.epoch_pre_ms,
            "epoch_post_ms": self.epoch_post_ms,
            "baseline_ms": list(self.baseline_ms),
            "theta_band_hz": list(self.theta_band_hz),
            "theta_window_ms": list(self.theta_window_ms),
            "n400_window_ms": list(self.n400_window_ms),
            "artifact_p2p_uv": self.artifact_p2p_uv,
            "parietal_labels": list(self.parietal_labels),
            "n_permutations": self.n_permutations,
            "k_sentences": self.k_sentences,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisConfig":
        kwargs = {}
        for key, value in d.items():
            if key not in cls.__dataclass_fields__:
                raise KeyError(f"unknown analysis option {key!r}")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)


@dataclass
class AnalysisResult:
    feature_table: object  # pandas DataFrame
    comparisons: list[statsmod.ComparisonResult]
    correlations: object  # pandas DataFrame
    classifier: dict | None
    erp: dict
    erp_difference: np.ndarray | None
    erp_times_ms: np.ndarray | None
    fixations: list
    word_metrics: list
    sentences: list
    top_sentences: list[int]
    exclusions: list
    artifact_rejections: list
    clock_models: dict = field(default_factory=dict)


def aligned_samples(rec: StreamRecord):
    """Dejitter a stream's stamps and map them onto the recording clock
    using the offsets recorded with the stream."""
    samples = rec.samples
    ts = samples.timestamps
    if rec.info.nominal_rate_hz > 0 and len(ts) > 1:
        ts = dejitter_timestamps(ts, rec.info.nominal_rate_hz)
    aligned = type(samples)(samples.stream, ts, samples.values)
    if len(rec.clock_offsets) >= 2:
        model = fit_clock_offset(rec.clock_offsets)
        return to_recording_clock(aligned, model.inverse()), model
    return aligned, IDENTITY_CLOCK


def analyze_session(session: SessionRecording, cfg: AnalysisConfig | None = None) -> AnalysisResult:
    cfg = cfg or AnalysisConfig()
    for kind in ("gaze", "eeg", "layout", "rating"):
        if session.stream_by_kind(kind) is None:
            raise MissingStream(f"session has no {kind} stream")

    clock_models = {}
    gaze_rec = session.stream_by_kind("gaze")
    eeg_rec = session.stream_by_kind("eeg")
    layout_rec = session.stream_by_kind("layout")
    rating_rec = session.stream_by_kind("rating")
    gaze_s, clock_models["gaze"] = aligned_samples(gaze_rec)
    eeg_s, clock_models["eeg"] = aligned_samples(eeg_rec)
    layout_s, clock_models["layout"] = aligned_samples(layout_rec)
    rating_s, clock_models["rating"] = aligned_samples(rating_rec)

    layouts = [
        gazemod.LayoutSnapshot.from_json(row[0]) for row in layout_s.values
    ]
    layouts = [
        gazemod.LayoutSnapshot(t, snap.words, snap.viewport)
        for t, snap in zip(layout_s.timestamps, layouts)
    ]

    # gaze -> fixations -> word/sentence metrics
    vals = np.asarray(gaze_s.values, dtype=np.float64)
    fixations = gazemod.detect_fixations_ivt(
        gaze_s.timestamps, vals[:, 0], vals[:, 1],
        valid=vals[:, 2] > 0.5 if vals.shape[1] > 2 else None,
        velocity_threshold_px_s=cfg.velocity_threshold_px_s,
        min_duration_ms=cfg.min_fixation_ms,
        bridge_gap_ms=cfg.bridge_gap_ms,
    )
    hits = []
    for fx in fixations:
        if fx.start_t < layouts[0].t:
            continue
        word_id = gazemod.map_fixation_to_word(fx, layouts, cfg.aoi_slack_px)
        if word_id is not None:
            hits.append((fx, word_id))
    word_metrics = gazemod.aggregate_word_metrics(hits)
    sentences = gazemod.sentence_metrics(word_metrics, layouts[-1])
    top = gazemod.select_longest_fixated(sentences, cfg.k_sentences)

    # ratings -> congruence labels
    ratings = [(int(round(row[0])), int(round(row[1]))) for row in np.asarray(rating_s.values)]

    word_sentence = {w.word_id: w.sentence_id for w in layouts[-1].words}
    word_expectedness = {w.word_id: w.expectedness for w in layouts[-1].words}
    sentence_congruence = {
        sid: statsmod.label_from_rating(r) for sid, r in ratings
    }

    # EEG -> epochs around first-fixation onsets
    eeg_vals = np.asarray(eeg_s.values, dtype=np.float64).T
    recording = eegmod.EegRecording(
        channels=list(eeg_rec.info.channel_labels),
        rate_hz=eeg_rec.info.nominal_rate_hz,
        data=eeg_vals,
        t0=float(eeg_s.timestamps[0]) if len(eeg_s.timestamps) else 0.0,
    )
    filtered = eegmod.bandpass_filter(recording, *cfg.filter_band_hz)
    onsets = []
    for wm in word_metrics:
        sid = word_sentence.get(wm.word_id)
        cond = sentence_congruence.get(sid)
        if cond in (statsmod.CONGRUENT, statsmod.INCONGRUENT):
            onsets.append((wm.first_fixation_start_t, wm.word_id, cond))
    epochs, exclusions = eegmod.epoch_around_onsets(
        filtered, onsets, cfg.epoch_pre_ms, cfg.epoch_post_ms, cfg.baseline_ms
    )
    kept, rejections = eegmod.reject_artifacts(epochs, cfg.artifact_p2p_uv)

    # Theta is an induced (non-phase-locked) measure, so the per-condition
    # evoked mean is removed before band power; N400 is read from the raw
    # baseline-corrected epochs.
    word_theta, word_n400 = {}, {}
    for ep, ind in zip(kept, eegmod.induced_epochs(kept)):
        feat = eegmod.theta_band_power(
            ind, cfg.theta_band_hz, cfg.theta_window_ms, cfg.parietal_labels
        )
        word_theta[ep.word_id] = feat.parietal_mean
        word_n400[ep.word_id] = eegmod.epoch_n400(ep, cfg.n400_window_ms, cfg.parietal_labels)

    erp, difference = {}, None
    times_ms = None
    conditions_present = {ep.condition_tag for ep in kept}
    if conditions_present:
        erp, difference = eegmod.compute_erp(
            kept, sorted(conditions_present), cfg.n400_window_ms, cfg.parietal_labels
        )
        times_ms = kept[0].times_ms()

    # feature table + statistics
    sentence_rows = statsmod.aggregate_sentence_features(
        word_sentence,
        {wm.word_id: wm.total_fixation_ms for wm in word_metrics},
        {wm.word_id: wm.fixation_count for wm in word_metrics},
        word_theta,
        word_n400,
        word_expectedness,
    )
    known_ratings = [(sid, r) for sid, r in ratings if sid in sentence_rows]
    table = statsmod.build_feature_table(sentence_rows, known_ratings)

    comparisons = []
    for i, feature in enumerate(("total_fixation_ms", "theta_parietal_uv2", "n400_uv")):
        try:
            comparisons.append(
                statsmod.paired_comparison(
                    table, feature, cfg.n_permutations, seed=cfg.seed + i
                )
            )
        except statsmod.InsufficientData:
            pass

    try:
        correlations = statsmod.correlate_modalities(
            table, ["theta_parietal_uv2", "n400_uv"], ["total_fixation_ms", "fixation_count"]
        )
    except statsmod.InsufficientData:
        correlations = None

    classifier = None
    try:
        coef, acc, auc = statsmod.train_eval_classifier(
            table,
            ["total_fixation_ms", "theta_parietal_uv2", "n400_uv"],
            k_folds=min(5, max(2, len(table) // 4)),
            seed=cfg.seed,
        )
        classifier = {"coefficients": coef, "cv_accuracy": acc, "cv_auc": auc}
    except (statsmod.SingleClass, statsmod.InsufficientData, statsmod.NonConvergence, ValueError):
        pass

    return AnalysisResult(
        feature_table=table,
        comparisons=comparisons,
        correlations=correlations,
        classifier=classifier,
        erp=erp,
        erp_difference=difference,
        erp_times_ms=times_ms,
        fixations=fixations,
        word_metrics=word_metrics,
        sentences=sentences,
        top_sentences=top,
        exclusions=exclusions,
        artifact_rejections=rejections,
        clock_models=clock_models,
    )
