"""Acceptance gate: one verdict line per release criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines as
they are produced.  Each test exercises one criterion at its stated
tolerance; the end-to-end calibration tests are the slow ones (minutes, not
seconds) because they sweep many simulated sessions.
"""

import time

import numpy as np
import pytest

from coreg.eeg import Epoch, compute_erp, n400_amplitude, theta_band_power
from coreg.errors import BadMagic, MalformedHeaderXml, TruncatedChunk
from coreg.gaze import detect_fixations_ivt
from coreg.pipeline import AnalysisConfig, aligned_samples, analyze_session
from coreg.report import write_reports
from coreg.simulate import GAZE_RATE, SimConfig, build_layout, simulate_session
from coreg.xdf import decode_session, encode_session


def _verdict(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


EFFECT_CONFIG = dict(duration_s=180.0, n_sentences=80, words_per_sentence=4,
                     fixation_ms_means=(260.0, 200.0), theta_gain=0.3,
                     n400_uv=-5.0, theta_amp_uv=6.0)
NULL_CONFIG = dict(duration_s=90.0, n_sentences=40, words_per_sentence=4,
                   fixation_ms_means=(230.0, 230.0), theta_gain=0.0,
                   n400_uv=0.0, theta_amp_uv=6.0)
FEATURES = ["total_fixation_ms", "theta_parietal_uv2", "n400_uv"]


def test_xdf_round_trip_and_fuzz():
    start = time.perf_counter()
    for seed in range(100):
        session, _ = simulate_session(
            SimConfig(seed=seed, duration_s=5.0, n_sentences=3, words_per_sentence=3)
        )
        assert decode_session(encode_session(session)) == session

    base = encode_session(
        simulate_session(SimConfig(seed=0, duration_s=3.0, n_sentences=2))[0]
    )
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        data = bytearray(base)
        for _ in range(int(rng.integers(1, 4))):
            data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
        try:
            decode_session(bytes(data))
        except (BadMagic, TruncatedChunk, MalformedHeaderXml):
            pass
    elapsed = time.perf_counter() - start
    _verdict(
        "xdf-round-trip",
        elapsed < 60.0,
        f"100 sessions bit-exact, 10k mutations structured-only, {elapsed:.1f} s",
    )


def test_clock_sync_recovery():
    cfg = SimConfig(seed=0, duration_s=60.0, n_sentences=10,
                    clock={"gaze": (0.5, 50.0), "eeg": (0.0, 0.0),
                           "input": (0.0, 0.0), "layout": (0.0, 0.0),
                           "rating": (0.0, 0.0)})
    session, _ = simulate_session(cfg)
    aligned, _ = aligned_samples(session.stream_by_kind("gaze"))
    truth = np.arange(aligned.n_samples) / GAZE_RATE
    worst = float(np.abs(aligned.timestamps - truth).max())
    _verdict("clock-sync", worst <= 1e-3,
             f"0.5 s offset + 50 ppm drift, worst alignment error {worst * 1e3:.3f} ms")


def test_theta_power_oracle():
    rate, channels = 125.0, ["P3", "Pz", "P4"]
    t = np.arange(int(rate)) / rate

    def power(amplitude):
        data = np.tile(amplitude * np.sin(2 * np.pi * 6.0 * t), (3, 1))
        ep = Epoch(0.0, 0.0, 1000.0, rate, channels, data)
        return theta_band_power(ep).parietal_mean

    p10 = power(10.0)
    ok = abs(p10 - 50.0) <= 5.0
    detail = f"6 Hz 10 uV tone -> {p10:.2f} uV^2 (target 50 +/- 5)"
    for k in (0.5, 2.0, 10.0):
        ratio = power(10.0 * k) / p10
        ok = ok and abs(ratio - k**2) <= 0.01 * k**2
        detail += f"; k={k:g} ratio {ratio:.4f}"
    _verdict("theta-oracle", ok, detail)


def test_erp_difference_oracle():
    rate = 125.0
    rng = np.random.default_rng(42)
    t = np.arange(int(rate)) / rate
    bump = -5.0 * np.exp(-((t - 0.4) ** 2) / (2 * 0.05**2))
    window = (t >= 0.3) & (t <= 0.5)
    bump *= -5.0 / bump[window].mean()
    epochs = []
    for i in range(200):
        tag = "incongruent" if i % 2 else "congruent"
        data = rng.normal(0.0, 10.0, size=(3, t.size)) + (bump if i % 2 else 0.0)
        epochs.append(Epoch(0.0, 0.0, 1000.0, rate, ["P3", "Pz", "P4"], data, tag))
    _, diff = compute_erp(epochs)
    amp = n400_amplitude(diff, epochs[0].times_ms(), ["P3", "Pz", "P4"])
    _verdict("erp-oracle", abs(amp + 5.0) <= 1.0,
             f"injected -5 uV on 100/200 noisy epochs -> {amp:.2f} uV (target -5 +/- 1)")


def test_effect_recovery_rate():
    hits = {f: 0 for f in FEATURES}
    for seed in range(20):
        session, _ = simulate_session(SimConfig(seed=seed, **EFFECT_CONFIG))
        result = analyze_session(session, AnalysisConfig(seed=seed, n_permutations=1000))
        by_name = {c.feature_name: c for c in result.comparisons}
        if by_name["total_fixation_ms"].p_permutation < 0.05 \
                and by_name["total_fixation_ms"].mean_congruent > by_name["total_fixation_ms"].mean_incongruent:
            hits["total_fixation_ms"] += 1
        if by_name["theta_parietal_uv2"].p_permutation < 0.05 \
                and by_name["theta_parietal_uv2"].mean_congruent > by_name["theta_parietal_uv2"].mean_incongruent:
            hits["theta_parietal_uv2"] += 1
        if by_name["n400_uv"].p_permutation < 0.05 \
                and by_name["n400_uv"].mean_incongruent < by_name["n400_uv"].mean_congruent:
            hits["n400_uv"] += 1
    ok = all(v >= 18 for v in hits.values())
    _verdict("effect-recovery", ok,
             "seeds significant in the expected direction (of 20, need >= 18): "
             + ", ".join(f"{k} {v}" for k, v in hits.items()))


def test_null_false_positive_rate():
    false_pos = {f: 0 for f in FEATURES}
    for seed in range(100):
        session, _ = simulate_session(SimConfig(seed=seed, **NULL_CONFIG))
        result = analyze_session(session, AnalysisConfig(seed=seed, n_permutations=1000))
        for c in result.comparisons:
            if c.p_permutation < 0.05:
                false_pos[c.feature_name] += 1
    rates = {k: v / 100.0 for k, v in false_pos.items()}
    ok = all(0.01 <= r <= 0.10 for r in rates.values())
    _verdict("null-calibration", ok,
             "false-positive rate at alpha=0.05 over 100 seeds (need 0.01..0.10): "
             + ", ".join(f"{k} {v:.2f}" for k, v in rates.items()))


def test_fixation_detector_exactness():
    worst_px, all_counts_exact = 0.0, True
    for seed in range(50):
        cfg = SimConfig(seed=seed, duration_s=30.0, n_sentences=8,
                        gaze_noise_px=0.0, timestamp_jitter_ms=0.0)
        session, truth = simulate_session(cfg)
        aligned, _ = aligned_samples(session.stream_by_kind("gaze"))
        vals = np.asarray(aligned.values)
        fixations = detect_fixations_ivt(aligned.timestamps, vals[:, 0], vals[:, 1], vals[:, 2])
        all_counts_exact = all_counts_exact and len(fixations) == len(truth.fixations)
        centers = {}
        for w in build_layout(cfg).words:
            centers[w.word_id] = (w.bbox.l + w.bbox.w / 2.0, w.bbox.t + w.bbox.h / 2.0)
        for fx, planned in zip(fixations, truth.fixations):
            cx, cy = centers[planned["word_id"]]
            worst_px = max(worst_px, abs(fx.centroid_x - cx), abs(fx.centroid_y - cy))
    _verdict("fixation-detector", all_counts_exact and worst_px <= 0.5,
             f"50 zero-noise seeds, counts exact: {all_counts_exact}, "
             f"worst centroid error {worst_px:.3f} px")


def test_five_minute_session_performance():
    start = time.perf_counter()
    session, _ = simulate_session(
        SimConfig(seed=7, duration_s=300.0, n_sentences=60, words_per_sentence=5)
    )
    analyze_session(session, AnalysisConfig(seed=7))
    elapsed = time.perf_counter() - start
    _verdict("performance", elapsed < 30.0,
             f"simulate + analyze 5-minute session in {elapsed:.1f} s (budget 30 s)")


def test_analysis_determinism(tmp_path):
    session_bytes = encode_session(
        simulate_session(SimConfig(seed=3, duration_s=30.0, n_sentences=10,
                                   fixation_ms_means=(260.0, 200.0),
                                   theta_gain=0.3, n400_uv=-5.0))[0]
    )
    reports = []
    for name in ("first", "second"):
        result = analyze_session(decode_session(session_bytes), AnalysisConfig(seed=9))
        out = tmp_path / name
        write_reports(result, out, {"analyze": AnalysisConfig(seed=9).to_dict()})
        reports.append((out / "report.json").read_bytes())
    _verdict("determinism", reports[0] == reports[1],
             f"two runs, report.json identical ({len(reports[0])} bytes)")
