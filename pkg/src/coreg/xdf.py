"""Reader/writer for the XDF chunked container used as the canonical
session file format.

Layout follows the public XDF 1.0 chunk structure: magic ``XDF:`` followed
by chunks of ``[1|4|8 length-of-length byte][length][u16 tag][content]``.
The writer is strict (invariants checked up front, every sample carries an
explicit timestamp); the reader is lenient (unknown tags are skipped with a
warning, omitted per-sample timestamps are reconstructed from the nominal
rate).
"""

from __future__ import annotations

import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, InvariantViolation, MalformedHeaderXml, TruncatedChunk
from .streams import ClockOffsetMeasurement, StreamInfo, TimedSamples

MAGIC = b"XDF:"

TAG_FILE_HEADER = 1
TAG_STREAM_HEADER = 2
TAG_SAMPLES = 3
TAG_CLOCK_OFFSET = 4
TAG_BOUNDARY = 5
TAG_STREAM_FOOTER = 6

KNOWN_TAGS = frozenset(range(1, 7))

# Boundary chunk payload fixed by the XDF spec.
BOUNDARY_UUID = bytes.fromhex("43a546dccbf5410fb30ed5467383cbe4")

MAX_SAMPLES_PER_CHUNK = 50_000

_WIRE_ITEMSIZE = {"float32": 4, "double64": 8}
_WIRE_DTYPE = {"float32": "<f4", "double64": "<f8"}


@dataclass
class StreamRecord:
    info: StreamInfo
    samples: TimedSamples
    clock_offsets: list[ClockOffsetMeasurement] = field(default_factory=list)
    footer_xml: str = ""


@dataclass
class SessionRecording:
    file_header_xml: str = "<info><version>1.0</version></info>"
    streams: list[StreamRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list, compare=False)

    def stream_by_kind(self, kind: str) -> StreamRecord | None:
        for rec in self.streams:
            if rec.info.kind == kind:
                return rec
        return None

    def validate(self):
        ids = [rec.info.stream_id for rec in self.streams]
        if len(set(ids)) != len(ids):
            raise InvariantViolation(f"duplicate stream ids in {ids}")
        for rec in self.streams:
            info = rec.info
            if info.channel_labels and len(info.channel_labels) != info.channel_count:
                raise InvariantViolation(
                    f"stream {info.stream_id}: label count != channel_count"
                )
            n = rec.samples.n_samples
            if info.channel_format == "string":
                if len(rec.samples.values) != n:
                    raise InvariantViolation(
                        f"stream {info.stream_id}: values rows != timestamps"
                    )
            elif rec.samples.values.shape != (n, info.channel_count):
                raise InvariantViolation(
                    f"stream {info.stream_id}: values shape "
                    f"{rec.samples.values.shape} != ({n}, {info.channel_count})"
                )


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------

def _varlen(value: int) -> bytes:
    if value < 256:
        return struct.pack("<BB", 1, value)
    if value < 2**32:
        return struct.pack("<BI", 4, value)
    return struct.pack("<BQ", 8, value)


def _chunk(tag: int, content: bytes) -> bytes:
    return _varlen(len(content) + 2) + struct.pack("<H", tag) + content


def _info_to_xml(info: StreamInfo) -> str:
    root = ET.Element("info")
    ET.SubElement(root, "name").text = info.stream_id
    ET.SubElement(root, "type").text = info.kind
    ET.SubElement(root, "channel_count").text = str(info.channel_count)
    ET.SubElement(root, "nominal_srate").text = repr(float(info.nominal_rate_hz))
    ET.SubElement(root, "channel_format").text = info.channel_format
    desc = ET.SubElement(root, "desc")
    if info.channel_labels:
        channels = ET.SubElement(desc, "channels")
        for label in info.channel_labels:
            ch = ET.SubElement(channels, "channel")
            ET.SubElement(ch, "label").text = label
    if info.source_metadata:
        meta = ET.SubElement(desc, "metadata")
        for key, value in info.source_metadata.items():
            entry = ET.SubElement(meta, "entry")
            ET.SubElement(entry, "key").text = key
            ET.SubElement(entry, "value").text = value
    return ET.tostring(root, encoding="unicode")


def _info_from_xml(xml_text: str) -> StreamInfo:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedHeaderXml(str(exc)) from exc
    try:
        labels = [
            ch.findtext("label") or ""
            for ch in root.findall("./desc/channels/channel")
        ]
        meta = {
            entry.findtext("key") or "": entry.findtext("value") or ""
            for entry in root.findall("./desc/metadata/entry")
        }
        return StreamInfo(
            stream_id=root.findtext("name") or "",
            kind=root.findtext("type") or "marker",
            channel_count=int(root.findtext("channel_count") or "1"),
            nominal_rate_hz=float(root.findtext("nominal_srate") or "0"),
            channel_labels=labels,
            source_metadata=meta,
            channel_format=root.findtext("channel_format") or "float32",
        )
    except (TypeError, ValueError) as exc:
        raise MalformedHeaderXml(f"bad stream header field: {exc}") from exc


def _encode_numeric_samples(samples: TimedSamples, fmt: str) -> bytes:
    n, ch = samples.values.shape
    rec = np.dtype([("flag", "u1"), ("ts", "<f8"), ("v", _WIRE_DTYPE[fmt], (ch,))])
    out = np.empty(n, dtype=rec)
    out["flag"] = 8
    out["ts"] = samples.timestamps
    out["v"] = samples.values
    return out.tobytes()


def _encode_string_samples(samples: TimedSamples) -> bytes:
    parts = []
    for ts, row in zip(samples.timestamps, samples.values):
        parts.append(struct.pack("<Bd", 8, ts))
        for value in row:
            raw = value.encode("utf-8")
            parts.append(_varlen(len(raw)) + raw)
    return b"".join(parts)


def encode_session(session: SessionRecording) -> bytes:
    """Serialize a session to XDF bytes. Raises InvariantViolation if the
    session's structural invariants do not hold."""
    session.validate()
    out = [MAGIC, _chunk(TAG_FILE_HEADER, session.file_header_xml.encode("utf-8"))]
    out.append(_chunk(TAG_BOUNDARY, BOUNDARY_UUID))
    for numeric_id, rec in enumerate(session.streams, start=1):
        sid = struct.pack("<I", numeric_id)
        out.append(_chunk(TAG_STREAM_HEADER, sid + _info_to_xml(rec.info).encode("utf-8")))
    for numeric_id, rec in enumerate(session.streams, start=1):
        sid = struct.pack("<I", numeric_id)
        samples = rec.samples
        for start in range(0, max(samples.n_samples, 1), MAX_SAMPLES_PER_CHUNK):
            block = TimedSamples(
                rec.info,
                samples.timestamps[start : start + MAX_SAMPLES_PER_CHUNK],
                samples.values[start : start + MAX_SAMPLES_PER_CHUNK],
            )
            if rec.info.channel_format == "string":
                payload = _encode_string_samples(block)
            else:
                payload = _encode_numeric_samples(block, rec.info.channel_format)
            out.append(
                _chunk(TAG_SAMPLES, sid + _varlen(block.n_samples) + payload)
            )
        for probe in rec.clock_offsets:
            out.append(
                _chunk(
                    TAG_CLOCK_OFFSET,
                    sid + struct.pack("<dd", probe.local_time, probe.measured_offset),
                )
            )
    for numeric_id, rec in enumerate(session.streams, start=1):
        if rec.footer_xml:
            sid = struct.pack("<I", numeric_id)
            out.append(_chunk(TAG_STREAM_FOOTER, sid + rec.footer_xml.encode("utf-8")))
    return b"".join(out)


# --------------------------------------------------------------------------
# decoding
# --------------------------------------------------------------------------

class _Reader:
    """Bounds-checked byte cursor; every over-read raises TruncatedChunk."""

    def __init__(self, data: bytes, start: int = 0, end: int | None = None):
        self.data = data
        self.pos = start
        self.end = len(data) if end is None else end

    @property
    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or n > self.remaining:
            raise TruncatedChunk(f"need {n} bytes, have {self.remaining}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def varlen(self) -> int:
        nbytes = self.u8()
        if nbytes == 1:
            return self.u8()
        if nbytes == 4:
            return self.unpack("<I")[0]
        if nbytes == 8:
            return self.unpack("<Q")[0]
        raise TruncatedChunk(f"invalid length-of-length marker {nbytes}")


class _StreamAssembly:
    def __init__(self, info: StreamInfo):
        self.info = info
        self.timestamp_blocks: list[np.ndarray] = []
        self.value_blocks: list = []
        self.clock_offsets: list[ClockOffsetMeasurement] = []
        self.footer_xml = ""
        self.last_timestamp: float | None = None


def _decode_samples_payload(reader: _Reader, asm: _StreamAssembly):
    n = reader.varlen()
    info = asm.info
    if info.channel_format == "string":
        if n * (1 + 2 * info.channel_count) > reader.remaining:
            raise TruncatedChunk(f"sample count {n} exceeds chunk payload")
        ts = np.empty(n)
        rows = []
        for i in range(n):
            ts[i] = _next_timestamp(reader, asm)
            rows.append(
                [
                    # lenient: damaged text payloads degrade, they don't crash
                    reader.take(reader.varlen()).decode("utf-8", errors="replace")
                    for _ in range(info.channel_count)
                ]
            )
        asm.timestamp_blocks.append(ts)
        asm.value_blocks.extend(rows)
        return

    itemsize = _WIRE_ITEMSIZE[info.channel_format]
    record = 1 + 8 + info.channel_count * itemsize
    if n * (1 + info.channel_count * itemsize) > reader.remaining:
        raise TruncatedChunk(f"sample count {n} exceeds chunk payload")
    if reader.remaining == n * record:
        # fast path: every sample may carry an explicit timestamp
        raw = np.frombuffer(reader.take(n * record), dtype=np.uint8).reshape(n, record)
        if n and np.all(raw[:, 0] == 8):
            ts = raw[:, 1:9].copy().view("<f8").ravel()
            vals = (
                raw[:, 9:]
                .copy()
                .view(_WIRE_DTYPE[info.channel_format])
                .reshape(n, info.channel_count)
            )
            asm.timestamp_blocks.append(ts)
            asm.value_blocks.append(vals)
            if n:
                asm.last_timestamp = float(ts[-1])
            return
        reader.pos -= n * record  # mixed flags: fall through to slow path

    ts = np.empty(n)
    vals = np.empty((n, info.channel_count), dtype=_WIRE_DTYPE[info.channel_format])
    vfmt = "<" + str(info.channel_count) + ("f" if itemsize == 4 else "d")
    for i in range(n):
        ts[i] = _next_timestamp(reader, asm)
        vals[i] = reader.unpack(vfmt)
    asm.timestamp_blocks.append(ts)
    asm.value_blocks.append(vals)


def _next_timestamp(reader: _Reader, asm: _StreamAssembly) -> float:
    flag = reader.u8()
    if flag == 8:
        t = reader.unpack("<d")[0]
    elif flag == 0:
        step = 1.0 / asm.info.nominal_rate_hz if asm.info.nominal_rate_hz > 0 else 0.0
        t = (asm.last_timestamp + step) if asm.last_timestamp is not None else 0.0
    else:
        raise TruncatedChunk(f"invalid timestamp flag byte {flag}")
    asm.last_timestamp = t
    return t


def decode_session(data: bytes) -> SessionRecording:
    """Parse XDF bytes into a SessionRecording.

    Unknown chunk tags and samples for undeclared streams are skipped and
    reported in ``session.warnings``; structural damage raises BadMagic,
    TruncatedChunk, or MalformedHeaderXml.
    """
    if data[:4] != MAGIC:
        raise BadMagic(f"expected XDF magic, got {data[:4]!r}")
    reader = _Reader(data, start=4)
    file_header_xml = ""
    order: list[int] = []
    assemblies: dict[int, _StreamAssembly] = {}
    warnings: list[str] = []

    while reader.remaining:
        length = reader.varlen()
        if length < 2 or length - 2 > reader.remaining - 2:
            raise TruncatedChunk(
                f"chunk length {length} exceeds remaining {reader.remaining}"
            )
        (tag,) = reader.unpack("<H")
        body = _Reader(reader.data, reader.pos, reader.pos + length - 2)
        reader.pos = body.end

        if tag == TAG_FILE_HEADER:
            try:
                file_header_xml = body.take(body.remaining).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedHeaderXml(str(exc)) from exc
        elif tag == TAG_STREAM_HEADER:
            (sid,) = body.unpack("<I")
            try:
                xml_text = body.take(body.remaining).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedHeaderXml(str(exc)) from exc
            assemblies[sid] = _StreamAssembly(_info_from_xml(xml_text))
            order.append(sid)
        elif tag == TAG_SAMPLES:
            (sid,) = body.unpack("<I")
            asm = assemblies.get(sid)
            if asm is None:
                warnings.append(f"samples for undeclared stream {sid} skipped")
                continue
            _decode_samples_payload(body, asm)
        elif tag == TAG_CLOCK_OFFSET:
            (sid,) = body.unpack("<I")
            t, off = body.unpack("<dd")
            asm = assemblies.get(sid)
            if asm is None:
                warnings.append(f"clock offset for undeclared stream {sid} skipped")
                continue
            asm.clock_offsets.append(ClockOffsetMeasurement(t, off))
        elif tag == TAG_BOUNDARY:
            pass
        elif tag == TAG_STREAM_FOOTER:
            (sid,) = body.unpack("<I")
            asm = assemblies.get(sid)
            text = body.take(body.remaining).decode("utf-8", errors="replace")
            if asm is None:
                warnings.append(f"footer for undeclared stream {sid} skipped")
                continue
            asm.footer_xml = text
        else:
            warnings.append(f"unknown chunk tag {tag} ({length} bytes) skipped")

    streams = []
    for sid in order:
        asm = assemblies[sid]
        if asm.timestamp_blocks:
            ts = np.concatenate(asm.timestamp_blocks)
        else:
            ts = np.empty(0)
        if asm.info.channel_format == "string":
            values = asm.value_blocks
        elif asm.value_blocks:
            values = np.concatenate(asm.value_blocks)
        else:
            values = np.empty((0, asm.info.channel_count))
        streams.append(
            StreamRecord(
                info=asm.info,
                samples=TimedSamples(asm.info, ts, values),
                clock_offsets=asm.clock_offsets,
                footer_xml=asm.footer_xml,
            )
        )
    return SessionRecording(file_header_xml, streams, warnings)


# --------------------------------------------------------------------------
# inspection
# --------------------------------------------------------------------------

def inspect(data: bytes) -> dict:
    """Per-stream summary of a decodable XDF byte string."""
    session = decode_session(data)
    summary = {"n_streams": len(session.streams), "streams": [], "warnings": session.warnings}
    for rec in session.streams:
        ts = rec.samples.timestamps
        summary["streams"].append(
            {
                "stream_id": rec.info.stream_id,
                "kind": rec.info.kind,
                "channel_count": rec.info.channel_count,
                "nominal_rate_hz": rec.info.nominal_rate_hz,
                "sample_count": rec.samples.n_samples,
                "duration_s": float(ts[-1] - ts[0]) if len(ts) > 1 else 0.0,
                "clock_offset_count": len(rec.clock_offsets),
            }
        )
    return summary
