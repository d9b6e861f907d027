"""Container round-trips, lenient decoding, and decoder robustness."""

import struct

import numpy as np
import pytest

from coreg.errors import BadMagic, InvariantViolation, MalformedHeaderXml, TruncatedChunk
from coreg.simulate import SimConfig, simulate_session
from coreg.streams import ClockOffsetMeasurement, StreamInfo, TimedSamples
from coreg.xdf import (
    MAGIC,
    SessionRecording,
    StreamRecord,
    decode_session,
    encode_session,
    inspect,
)


def _numeric_record(stream_id="g", kind="gaze", n=17, ch=3, rate=300.0, fmt="float32", seed=0):
    rng = np.random.default_rng(seed)
    info = StreamInfo(stream_id, kind, ch, rate, [f"c{i}" for i in range(ch)],
                      {"device": "test"}, fmt)
    ts = np.arange(n) / max(rate, 1.0) + rng.uniform(0, 1e-3)
    vals = rng.standard_normal((n, ch))
    probes = [ClockOffsetMeasurement(float(i), 0.01 * i) for i in range(3)]
    return StreamRecord(info, TimedSamples(info, ts, vals), probes, "<info><n>17</n></info>")


def _string_record():
    info = StreamInfo("lay", "layout", 1, 0.0, ["snapshot_json"], {}, "string")
    ts = np.array([0.5, 1.5])
    vals = [['{"a": 1}'], ["plain text with unicode µV"]]
    return StreamRecord(info, TimedSamples(info, ts, vals), [], "")


class TestRoundTrip:
    def test_minimal_file(self):
        data = encode_session(SessionRecording(file_header_xml="<info/>"))
        assert data.startswith(MAGIC)
        session = decode_session(data)
        assert session.file_header_xml == "<info/>"
        assert session.streams == []

    def test_two_stream_session(self):
        session = SessionRecording(streams=[
            _numeric_record("gaze1", "gaze", 300, 3, 300.0),
            _numeric_record("eeg1", "eeg", 125, 16, 125.0),
        ])
        assert decode_session(encode_session(session)) == session

    def test_string_stream(self):
        session = SessionRecording(streams=[_string_record()])
        assert decode_session(encode_session(session)) == session

    def test_double64_stream(self):
        session = SessionRecording(streams=[
            _numeric_record(fmt="double64", seed=3),
        ])
        assert decode_session(encode_session(session)) == session

    def test_timestamps_bit_exact(self):
        rec = _numeric_record(seed=11)
        # awkward float values must survive exactly
        rec.samples.timestamps[0] = 0.1 + 0.2
        rec.samples.timestamps[1] = np.nextafter(1.0, 2.0)
        out = decode_session(encode_session(SessionRecording(streams=[rec])))
        assert np.array_equal(out.streams[0].samples.timestamps, rec.samples.timestamps)

    def test_hundred_randomized_sessions(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            streams = []
            for i in range(rng.integers(1, 4)):
                fmt = ["float32", "double64"][int(rng.integers(0, 2))]
                streams.append(
                    _numeric_record(f"s{i}", "marker", int(rng.integers(0, 40)),
                                    int(rng.integers(1, 5)), float(rng.integers(0, 300)),
                                    fmt, seed * 10 + i)
                )
            if rng.uniform() < 0.3:
                streams.append(_string_record())
            session = SessionRecording(streams=streams)
            assert decode_session(encode_session(session)) == session

    def test_simulator_session_round_trip(self):
        session, _ = simulate_session(SimConfig(seed=5, duration_s=10.0, n_sentences=4))
        assert decode_session(encode_session(session)) == session

    def test_large_stream_chunked(self):
        # more samples than one chunk holds
        rec = _numeric_record(n=120_001, ch=2, rate=1000.0, seed=9)
        out = decode_session(encode_session(SessionRecording(streams=[rec])))
        assert out.streams[0].samples == rec.samples


class TestWriterStrictness:
    def test_duplicate_ids_rejected(self):
        session = SessionRecording(streams=[_numeric_record("x"), _numeric_record("x")])
        with pytest.raises(InvariantViolation):
            encode_session(session)

    def test_shape_mismatch_rejected(self):
        rec = _numeric_record()
        rec.samples.values = rec.samples.values[:, :2]
        with pytest.raises(InvariantViolation):
            encode_session(SessionRecording(streams=[rec]))


class TestReaderLeniency:
    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            decode_session(b"PDF:" + b"\x00" * 20)

    def test_truncation_any_cut_never_crashes(self):
        data = encode_session(SessionRecording(streams=[_numeric_record(n=5)]))
        saw_truncated = False
        for cut in range(4, len(data)):
            try:
                decode_session(data[:cut])
            except (TruncatedChunk, MalformedHeaderXml):
                saw_truncated = True
        assert saw_truncated
        with pytest.raises(TruncatedChunk):
            decode_session(data[:-1])

    def test_unknown_tag_warned_and_skipped(self):
        session = SessionRecording(streams=[_numeric_record(n=4)])
        data = encode_session(session)
        extra = struct.pack("<BB", 1, 6) + struct.pack("<H", 99) + b"abcd"
        out = decode_session(data + extra)
        assert out == session
        assert any("unknown chunk tag 99" in w for w in out.warnings)

    def test_samples_for_undeclared_stream_warned(self):
        data = encode_session(SessionRecording())
        orphan = struct.pack("<I", 42) + struct.pack("<BB", 1, 0)
        chunk = struct.pack("<BB", 1, len(orphan) + 2) + struct.pack("<H", 3) + orphan
        out = decode_session(data + chunk)
        assert any("undeclared stream 42" in w for w in out.warnings)

    def test_omitted_timestamps_reconstructed(self):
        # hand-build a samples chunk whose second sample has flag 0
        info = StreamInfo("s", "marker", 1, 10.0, ["v"], {}, "float32")
        session = SessionRecording(streams=[
            StreamRecord(info, TimedSamples(info, np.empty(0), np.empty((0, 1))))
        ])
        data = encode_session(session)
        payload = struct.pack("<I", 1) + struct.pack("<BB", 1, 2)
        payload += struct.pack("<Bd", 8, 2.0) + struct.pack("<f", 1.0)
        payload += struct.pack("<B", 0) + struct.pack("<f", 2.0)  # no explicit stamp
        chunk = struct.pack("<BB", 1, len(payload) + 2) + struct.pack("<H", 3) + payload
        out = decode_session(data + chunk)
        ts = out.streams[0].samples.timestamps
        assert np.allclose(ts, [2.0, 2.1])

    def test_forged_sample_count_rejected_without_allocation(self):
        info = StreamInfo("s", "marker", 1, 0.0, ["v"], {}, "float32")
        session = SessionRecording(streams=[
            StreamRecord(info, TimedSamples(info, np.array([0.0]), np.array([[0.0]])))
        ])
        data = bytearray(encode_session(session))
        # claim 2**31 samples inside a tiny chunk
        payload = struct.pack("<I", 1) + struct.pack("<BI", 4, 2**31)
        chunk = struct.pack("<BB", 1, len(payload) + 2) + struct.pack("<H", 3) + payload
        with pytest.raises(TruncatedChunk):
            decode_session(bytes(data) + chunk)

    def test_fuzz_mutations_never_crash(self):
        base = encode_session(
            SessionRecording(streams=[_numeric_record(n=30), _string_record()])
        )
        rng = np.random.default_rng(2024)
        for _ in range(10_000):
            data = bytearray(base)
            for _ in range(int(rng.integers(1, 4))):
                data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
            try:
                decode_session(bytes(data))
            except (BadMagic, TruncatedChunk, MalformedHeaderXml):
                pass  # structured rejection is the contract


class TestInspect:
    def test_minimal(self):
        summary = inspect(encode_session(SessionRecording()))
        assert summary["n_streams"] == 0

    def test_simulator_session_counts(self):
        session, _ = simulate_session(SimConfig(seed=1, duration_s=60.0, n_sentences=8))
        summary = inspect(encode_session(session))
        by_kind = {s["kind"]: s for s in summary["streams"]}
        assert abs(by_kind["gaze"]["sample_count"] - 60 * 300) <= 1
        assert by_kind["eeg"]["channel_count"] == 16
        assert by_kind["eeg"]["nominal_rate_hz"] == 125.0
