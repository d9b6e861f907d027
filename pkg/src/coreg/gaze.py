"""Gaze event detection and word/sentence area-of-interest scoring.

Fixations are detected with a velocity-threshold (I-VT) classifier on
point-to-point velocities, then mapped onto word bounding boxes taken from
the most recent layout snapshot, and aggregated into word- and
sentence-level dwell metrics.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, NoLayoutAvailable

# I-VT defaults; all exposed through the run configuration.
DEFAULT_VELOCITY_THRESHOLD_PX_S = 1000.0
DEFAULT_MIN_DURATION_MS = 60.0
DEFAULT_BRIDGE_GAP_MS = 75.0
DEFAULT_AOI_SLACK_PX = 15.0


@dataclass(frozen=True)
class Fixation:
    start_t: float
    end_t: float
    centroid_x: float
    centroid_y: float
    sample_count: int

    @property
    def duration_ms(self) -> float:
        return (self.end_t - self.start_t) * 1000.0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in document coordinates (left, top, width, height)."""

    l: float
    t: float
    w: float
    h: float

    def contains(self, x: float, y: float) -> bool:
        return self.l <= x <= self.l + self.w and self.t <= y <= self.t + self.h

    def distance_to(self, x: float, y: float) -> float:
        dx = max(self.l - x, 0.0, x - (self.l + self.w))
        dy = max(self.t - y, 0.0, y - (self.t + self.h))
        return float(np.hypot(dx, dy))


@dataclass(frozen=True)
class WordBox:
    word_id: int
    sentence_id: int
    text: str
    bbox: BBox
    expectedness: float | None = None


@dataclass(frozen=True)
class Viewport:
    scroll_x: float
    scroll_y: float
    width: float
    height: float


@dataclass(frozen=True)
class LayoutSnapshot:
    t: float
    words: tuple[WordBox, ...]
    viewport: Viewport

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.t,
                "words": [
                    {
                        "word_id": w.word_id,
                        "sentence_id": w.sentence_id,
                        "text": w.text,
                        "bbox": {"l": w.bbox.l, "t": w.bbox.t, "w": w.bbox.w, "h": w.bbox.h},
                        "expectedness": w.expectedness,
                    }
                    for w in self.words
                ],
                "viewport": {
                    "sx": self.viewport.scroll_x,
                    "sy": self.viewport.scroll_y,
                    "w": self.viewport.width,
                    "h": self.viewport.height,
                },
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "LayoutSnapshot":
        d = json.loads(payload)
        words = tuple(
            WordBox(
                word_id=w["word_id"],
                sentence_id=w["sentence_id"],
                text=w.get("text", ""),
                bbox=BBox(w["bbox"]["l"], w["bbox"]["t"], w["bbox"]["w"], w["bbox"]["h"]),
                expectedness=w.get("expectedness"),
            )
            for w in d["words"]
        )
        vp = d["viewport"]
        return cls(d["t"], words, Viewport(vp["sx"], vp["sy"], vp["w"], vp["h"]))


@dataclass
class WordMetrics:
    word_id: int
    total_fixation_ms: float
    first_fixation_start_t: float
    first_fixation_end_t: float
    fixation_count: int


@dataclass
class SentenceMetrics:
    sentence_id: int
    total_fixation_ms: float
    words_fixated: int
    first_entry_t: float


def detect_fixations_ivt(
    t,
    x,
    y,
    valid=None,
    velocity_threshold_px_s: float = DEFAULT_VELOCITY_THRESHOLD_PX_S,
    min_duration_ms: float = DEFAULT_MIN_DURATION_MS,
    bridge_gap_ms: float = DEFAULT_BRIDGE_GAP_MS,
) -> list[Fixation]:
    """I-VT fixation detection on a time-ordered gaze trace.

    Invalid samples are dropped; runs of below-threshold velocity spanning
    an invalid gap of at most ``bridge_gap_ms`` are bridged, longer gaps
    terminate the run.  Runs shorter than ``min_duration_ms`` are discarded.
    """
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if t.size == 0:
        raise EmptyInput("no gaze samples")
    if valid is None:
        mask = np.isfinite(x) & np.isfinite(y)
    else:
        mask = np.asarray(valid, dtype=bool) & np.isfinite(x) & np.isfinite(y)
    t, x, y = t[mask], x[mask], y[mask]
    if t.size < 2:
        return []

    dt = np.diff(t)
    dt[dt <= 0] = np.finfo(float).eps
    speed = np.hypot(np.diff(x), np.diff(y)) / dt
    # transition i -> i+1 continues a fixation iff it is slow and the time
    # gap (from dropped invalid samples) is bridgeable
    slow = (speed < velocity_threshold_px_s) & (dt <= bridge_gap_ms / 1000.0)

    fixations: list[Fixation] = []
    run_start = None
    for i, ok in enumerate(slow):
        if ok and run_start is None:
            run_start = i
        elif not ok and run_start is not None:
            _maybe_emit(fixations, t, x, y, run_start, i, min_duration_ms)
            run_start = None
    if run_start is not None:
        _maybe_emit(fixations, t, x, y, run_start, len(t) - 1, min_duration_ms)
    return fixations


def _maybe_emit(out, t, x, y, i0, i1, min_duration_ms):
    duration_ms = (t[i1] - t[i0]) * 1000.0
    if duration_ms >= min_duration_ms:
        sl = slice(i0, i1 + 1)
        out.append(
            Fixation(
                start_t=float(t[i0]),
                end_t=float(t[i1]),
                centroid_x=float(x[sl].mean()),
                centroid_y=float(y[sl].mean()),
                sample_count=i1 - i0 + 1,
            )
        )


def map_fixation_to_word(
    fixation: Fixation,
    layouts: list[LayoutSnapshot],
    slack_px: float = DEFAULT_AOI_SLACK_PX,
) -> int | None:
    """Score a fixation against the latest layout at or before its start.

    The screen-space centroid is converted to document coordinates by adding
    the snapshot's scroll offsets; returns the containing word id, else the
    nearest word within ``slack_px``, else None.
    """
    times = [s.t for s in layouts]
    idx = bisect.bisect_right(times, fixation.start_t) - 1
    if idx < 0:
        raise NoLayoutAvailable(
            f"no layout snapshot at or before t={fixation.start_t:.3f}"
        )
    snapshot = layouts[idx]
    doc_x = fixation.centroid_x + snapshot.viewport.scroll_x
    doc_y = fixation.centroid_y + snapshot.viewport.scroll_y

    best_id, best_dist = None, np.inf
    for word in snapshot.words:
        if word.bbox.contains(doc_x, doc_y):
            return word.word_id
        d = word.bbox.distance_to(doc_x, doc_y)
        if d < best_dist:
            best_id, best_dist = word.word_id, d
    if best_dist <= slack_px:
        return best_id
    return None


def aggregate_word_metrics(hits: list[tuple[Fixation, int]]) -> list[WordMetrics]:
    """Per-word dwell totals, fixation counts, and first-fixation times."""
    by_word: dict[int, WordMetrics] = {}
    for fixation, word_id in hits:
        wm = by_word.get(word_id)
        if wm is None:
            by_word[word_id] = WordMetrics(
                word_id=word_id,
                total_fixation_ms=fixation.duration_ms,
                first_fixation_start_t=fixation.start_t,
                first_fixation_end_t=fixation.end_t,
                fixation_count=1,
            )
        else:
            wm.total_fixation_ms += fixation.duration_ms
            wm.fixation_count += 1
            if fixation.start_t < wm.first_fixation_start_t:
                wm.first_fixation_start_t = fixation.start_t
                wm.first_fixation_end_t = fixation.end_t
    return sorted(by_word.values(), key=lambda w: w.first_fixation_start_t)


def sentence_metrics(
    word_metrics: list[WordMetrics], layout: LayoutSnapshot
) -> list[SentenceMetrics]:
    """Fold word metrics up to sentences using the layout's word->sentence map."""
    word_to_sentence = {w.word_id: w.sentence_id for w in layout.words}
    by_sentence: dict[int, SentenceMetrics] = {}
    for wm in word_metrics:
        sid = word_to_sentence.get(wm.word_id)
        if sid is None:
            continue
        sm = by_sentence.get(sid)
        if sm is None:
            by_sentence[sid] = SentenceMetrics(
                sentence_id=sid,
                total_fixation_ms=wm.total_fixation_ms,
                words_fixated=1,
                first_entry_t=wm.first_fixation_start_t,
            )
        else:
            sm.total_fixation_ms += wm.total_fixation_ms
            sm.words_fixated += 1
            sm.first_entry_t = min(sm.first_entry_t, wm.first_fixation_start_t)
    return sorted(by_sentence.values(), key=lambda s: s.sentence_id)


def select_longest_fixated(sentences: list[SentenceMetrics], k: int) -> list[int]:
    """Top-k sentence ids by total dwell, ties broken by earlier first entry."""
    ranked = sorted(sentences, key=lambda s: (-s.total_fixation_ms, s.first_entry_t))
    return [s.sentence_id for s in ranked[: max(k, 0)]]
