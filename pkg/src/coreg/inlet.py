"""Network intake for live streams over WebSocket.

Replaces the vendor streaming apps: clients connect to ``/inlet``, declare
streams with a hello message, push timestamped sample batches (JSON text
frames, or binary frames with little-endian real arrays), and answer the
server's NTP-style clock probes.  A single recorder owns the session state;
connection handlers only post into it from the one event loop.

Wire schema (JSON field names are part of the external interface):
  {"type": "hello", "stream_id": ..., "info": {...}}
  {"type": "samples", "stream_id": ..., "timestamps": [...], "values": [[...]]}
  {"type": "probe_request", "probe_id": ..., "t0": ...}      (server -> client)
  {"type": "probe_response", "probe_id": ..., "t0": ..., "t1": ..., "t2": ...}
  {"type": "bye", "stream_id": ...}
"""

from __future__ import annotations

import asyncio
import json
import logging
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import websockets
from websockets.asyncio.server import serve as ws_serve

from .errors import BindFailure, NegativeRoundTrip, ProtocolViolation
from .streams import ClockOffsetMeasurement, StreamInfo, TimedSamples
from .xdf import SessionRecording, StreamRecord, encode_session

log = logging.getLogger("coreg.inlet")

DEFAULT_PROBE_PERIOD_S = 5.0
BINARY_HEADER = struct.Struct("<IIH")  # id_len, n_samples, n_channels


@dataclass(frozen=True)
class ClockProbeResponse:
    probe_id: int
    t0: float  # probing side send (recording clock)
    t1: float  # responding side receive (remote clock)
    t2: float  # responding side send (remote clock)


def probe_offset(probe: ClockProbeResponse, t_client_recv: float) -> ClockOffsetMeasurement:
    """Two-way probe to offset: remote minus recording clock, recorded at
    the midpoint of the probing side's send/receive times.

    With asymmetric path latency the estimate is biased by half the
    asymmetry; that bias is inherent to two-way probing.
    """
    if t_client_recv < probe.t0:
        raise NegativeRoundTrip(f"probe {probe.probe_id}: t3 < t0")
    offset = ((probe.t1 - probe.t0) + (probe.t2 - t_client_recv)) / 2.0
    return ClockOffsetMeasurement((probe.t0 + t_client_recv) / 2.0, offset)


@dataclass
class _StreamBuffer:
    info: StreamInfo
    timestamps: list = field(default_factory=list)
    values: list = field(default_factory=list)
    offsets: list = field(default_factory=list)
    closed: bool = False

    def to_record(self) -> StreamRecord:
        ts = np.concatenate(self.timestamps) if self.timestamps else np.empty(0)
        if self.info.channel_format == "string":
            values = [row for block in self.values for row in block]
        elif self.values:
            values = np.concatenate([np.atleast_2d(v) for v in self.values])
        else:
            values = np.empty((0, self.info.channel_count))
        footer = f"<info><sample_count>{len(ts)}</sample_count></info>"
        return StreamRecord(self.info, TimedSamples(self.info, ts, values), list(self.offsets), footer)


class InletServer:
    """WebSocket intake service; construct via :func:`serve_inlet`."""

    def __init__(self, host: str, port: int, session_sink=None,
                 probe_period_s: float = DEFAULT_PROBE_PERIOD_S,
                 clock=time.monotonic):
        self._host = host
        self._requested_port = port
        self._session_sink = session_sink
        self._probe_period_s = probe_period_s
        self._clock = clock
        self._buffers: dict[str, _StreamBuffer] = {}
        self._order: list[str] = []
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._server = None
        self._stopped = threading.Event()
        self._started = threading.Event()
        self._start_error: BaseException | None = None
        self.port: int | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._run, name="coreg-inlet", daemon=True)
        self._thread.start()
        self._started.wait(timeout=10)
        if self._start_error is not None:
            raise BindFailure(str(self._start_error))
        return self

    def _run(self):
        self._loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self._loop)
        try:
            self._loop.run_until_complete(self._main())
        finally:
            self._loop.close()

    async def _main(self):
        try:
            self._server = await ws_serve(self._handler, self._host, self._requested_port)
        except OSError as exc:
            self._start_error = exc
            self._started.set()
            return
        self.port = self._server.sockets[0].getsockname()[1]
        self._shutdown_event = asyncio.Event()
        self._started.set()
        await self._shutdown_event.wait()
        self._server.close()
        await self._server.wait_closed()

    def stop(self) -> SessionRecording:
        """Blocking, idempotent shutdown; returns the recorded session."""
        if self._thread is not None and self._thread.is_alive() and not self._stopped.is_set():
            self._stopped.set()
            event = getattr(self, "_shutdown_event", None)
            if event is not None:
                try:
                    self._loop.call_soon_threadsafe(event.set)
                except RuntimeError:
                    pass
            self._thread.join(timeout=10)
        session = self.session()
        if self._session_sink is not None:
            sink, self._session_sink = self._session_sink, None
            sink(session)
        return session

    def session(self) -> SessionRecording:
        return SessionRecording(
            file_header_xml="<info><version>1.0</version><origin>coreg-inlet</origin></info>",
            streams=[self._buffers[sid].to_record() for sid in self._order],
        )

    def encoded_session(self) -> bytes:
        return encode_session(self.session())

    # -- per-connection handling -------------------------------------------

    async def _handler(self, websocket):
        path = getattr(getattr(websocket, "request", None), "path", "/inlet")
        if path.split("?")[0] != "/inlet":
            await websocket.close(code=1008, reason="unknown endpoint")
            return
        conn_streams: list[str] = []
        pending_probes: dict[int, float] = {}
        probe_task = asyncio.create_task(
            self._probe_loop(websocket, pending_probes)
        )
        try:
            async for message in websocket:
                try:
                    if isinstance(message, bytes):
                        self._handle_binary(message, conn_streams)
                    else:
                        self._handle_text(message, conn_streams, pending_probes)
                except ProtocolViolation as exc:
                    log.warning("protocol violation: %s", exc)
                    await websocket.close(code=1008, reason=str(exc)[:100])
                    break
        except websockets.ConnectionClosed:
            pass
        finally:
            probe_task.cancel()
            for sid in conn_streams:
                buf = self._buffers.get(sid)
                if buf is not None:
                    buf.closed = True

    async def _probe_loop(self, websocket, pending_probes):
        probe_id = 0
        try:
            while True:
                pending_probes[probe_id] = self._clock()
                await websocket.send(
                    json.dumps(
                        {"type": "probe_request", "probe_id": probe_id,
                         "t0": pending_probes[probe_id]}
                    )
                )
                probe_id += 1
                await asyncio.sleep(self._probe_period_s)
        except (websockets.ConnectionClosed, asyncio.CancelledError):
            pass

    def _handle_text(self, message, conn_streams, pending_probes):
        try:
            msg = json.loads(message)
            mtype = msg["type"]
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise ProtocolViolation(f"unparseable message: {exc}") from exc

        if mtype == "hello":
            self._on_hello(msg, conn_streams)
        elif mtype == "samples":
            self._on_samples(msg, conn_streams)
        elif mtype == "probe_response":
            self._on_probe_response(msg, conn_streams, pending_probes)
        elif mtype == "bye":
            sid = msg.get("stream_id")
            if sid in conn_streams:
                self._buffers[sid].closed = True
        else:
            raise ProtocolViolation(f"unknown message type {mtype!r}")

    def _on_hello(self, msg, conn_streams):
        try:
            info_d = msg["info"]
            info = StreamInfo(
                stream_id=msg["stream_id"],
                kind=info_d["kind"],
                channel_count=int(info_d["channel_count"]),
                nominal_rate_hz=float(info_d.get("nominal_rate_hz", 0.0)),
                channel_labels=list(info_d.get("channel_labels", [])),
                source_metadata=dict(info_d.get("source_metadata", {})),
                channel_format=info_d.get("channel_format", "float32"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolViolation(f"bad hello: {exc}") from exc
        if info.stream_id in self._buffers and not self._buffers[info.stream_id].closed:
            raise ProtocolViolation(f"stream {info.stream_id!r} already registered")
        self._buffers[info.stream_id] = _StreamBuffer(info)
        if info.stream_id not in self._order:
            self._order.append(info.stream_id)
        conn_streams.append(info.stream_id)

    def _buffer_for(self, stream_id, conn_streams) -> _StreamBuffer:
        if stream_id not in conn_streams:
            raise ProtocolViolation(f"samples before hello for stream {stream_id!r}")
        return self._buffers[stream_id]

    def _on_samples(self, msg, conn_streams):
        try:
            buf = self._buffer_for(msg["stream_id"], conn_streams)
            ts = np.asarray(msg["timestamps"], dtype=np.float64)
            if buf.info.channel_format == "string":
                values = [[str(v) for v in row] for row in msg["values"]]
                if len(values) != len(ts):
                    raise ValueError("row count mismatch")
            else:
                values = np.asarray(msg["values"], dtype=np.float64)
                if values.ndim == 1:
                    values = values.reshape(-1, 1)
                if values.shape != (len(ts), buf.info.channel_count):
                    raise ValueError(f"batch shape {values.shape} mismatch")
        except ProtocolViolation:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolViolation(f"bad sample batch: {exc}") from exc
        buf.timestamps.append(ts)
        buf.values.append(values)

    def _handle_binary(self, frame: bytes, conn_streams):
        try:
            id_len, n, ch = BINARY_HEADER.unpack_from(frame, 0)
            pos = BINARY_HEADER.size
            stream_id = frame[pos : pos + id_len].decode("utf-8")
            pos += id_len
            ts = np.frombuffer(frame, dtype="<f8", count=n, offset=pos)
            pos += 8 * n
            values = np.frombuffer(frame, dtype="<f4", count=n * ch, offset=pos).reshape(n, ch)
        except (struct.error, UnicodeDecodeError, ValueError) as exc:
            raise ProtocolViolation(f"bad binary batch: {exc}") from exc
        buf = self._buffer_for(stream_id, conn_streams)
        if ch != buf.info.channel_count:
            raise ProtocolViolation(f"binary batch channel count {ch} mismatch")
        buf.timestamps.append(ts.astype(np.float64))
        buf.values.append(values.astype(np.float64))

    def _on_probe_response(self, msg, conn_streams, pending_probes):
        t3 = self._clock()
        try:
            probe = ClockProbeResponse(
                probe_id=int(msg["probe_id"]),
                t0=float(msg["t0"]),
                t1=float(msg["t1"]),
                t2=float(msg["t2"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolViolation(f"bad probe response: {exc}") from exc
        if probe.probe_id not in pending_probes:
            raise ProtocolViolation(f"unknown probe id {probe.probe_id}")
        del pending_probes[probe.probe_id]
        try:
            measurement = probe_offset(probe, t3)
        except NegativeRoundTrip:
            return  # skip a late/garbled probe, keep the connection
        for sid in conn_streams:
            self._buffers[sid].offsets.append(measurement)


def serve_inlet(host: str, port: int, session_sink=None,
                probe_period_s: float = DEFAULT_PROBE_PERIOD_S,
                clock=time.monotonic) -> InletServer:
    """Start an inlet service; raises BindFailure if the port is taken."""
    return InletServer(host, port, session_sink, probe_period_s, clock).start()


def encode_binary_batch(stream_id: str, timestamps, values) -> bytes:
    """Client-side helper: binary sample-batch frame."""
    sid = stream_id.encode("utf-8")
    ts = np.asarray(timestamps, dtype="<f8")
    vals = np.asarray(values, dtype="<f4")
    if vals.ndim == 1:
        vals = vals.reshape(-1, 1)
    header = BINARY_HEADER.pack(len(sid), len(ts), vals.shape[1])
    return header + sid + ts.tobytes() + vals.tobytes()
