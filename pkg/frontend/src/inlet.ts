/**
 * WebSocket client for the recording toolkit's inlet endpoint.
 *
 * Declares streams with hello messages, pushes timestamped sample batches,
 * answers the server's clock probes, and reconnects with exponential
 * backoff.  Samples produced while disconnected go into a bounded buffer
 * and are flushed after the next hello exchange.
 */
import { InletMessage, StreamDeclaration } from "./schema";

export type InletStatus = "connecting" | "connected" | "disconnected";

/** Structural subset of the browser WebSocket, injectable for tests. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export interface InletClientOptions {
  socketFactory?: (url: string) => SocketLike;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  onStatus?: (status: InletStatus) => void;
  backoffMs?: number[];
  maxBufferedBatches?: number;
}

interface PendingBatch {
  streamId: string;
  timestamps: number[];
  values: (number[] | string[])[];
}

export class InletClient {
  private readonly socketFactory: (url: string) => SocketLike;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly onStatus: (status: InletStatus) => void;
  private readonly backoffMs: number[];
  private readonly maxBufferedBatches: number;

  private readonly streams = new Map<string, StreamDeclaration>();
  private buffer: PendingBatch[] = [];
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  status: InletStatus = "disconnected";

  constructor(
    private readonly url: string,
    options: InletClientOptions = {},
  ) {
    this.socketFactory = options.socketFactory
      ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.now = options.now ?? (() => performance.now() / 1000);
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.onStatus = options.onStatus ?? (() => undefined);
    this.backoffMs = options.backoffMs ?? [500, 1000, 2000, 5000, 10000];
    this.maxBufferedBatches = options.maxBufferedBatches ?? 1000;
  }

  connect(): void {
    if (this.closed) {
      return;
    }
    this.setStatus("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      for (const [streamId, info] of this.streams) {
        this.sendRaw({ type: "hello", stream_id: streamId, info });
      }
      this.setStatus("connected");
      this.flushBuffer();
    };
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onclose = () => this.handleDrop();
    socket.onerror = () => undefined; // onclose follows and handles retry
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.setStatus("disconnected");
  }

  /** Register a stream; the hello is (re)sent on every (re)connection. */
  declareStream(streamId: string, info: StreamDeclaration): void {
    this.streams.set(streamId, info);
    if (this.status === "connected") {
      this.sendRaw({ type: "hello", stream_id: streamId, info });
    }
  }

  sendSamples(
    streamId: string,
    timestamps: number[],
    values: (number[] | string[])[],
  ): void {
    if (!this.streams.has(streamId)) {
      throw new Error(`stream ${streamId} not declared`);
    }
    if (timestamps.length !== values.length) {
      throw new Error("timestamps and values must have equal length");
    }
    const batch = { streamId, timestamps, values };
    if (this.status === "connected") {
      this.sendBatch(batch);
    } else {
      this.buffer.push(batch);
      if (this.buffer.length > this.maxBufferedBatches) {
        this.buffer.shift(); // drop oldest; the stream is best-effort
      }
    }
  }

  private handleMessage(data: string): void {
    let msg: InletMessage;
    try {
      msg = JSON.parse(data) as InletMessage;
    } catch {
      return;
    }
    if (msg.type === "probe_request") {
      const t = this.now();
      this.sendRaw({
        type: "probe_response",
        probe_id: msg.probe_id,
        t0: msg.t0,
        t1: t,
        t2: this.now(),
      });
    }
  }

  private handleDrop(): void {
    this.socket = null;
    if (this.closed) {
      return;
    }
    this.setStatus("disconnected");
    const delay = this.backoffMs[Math.min(this.attempts, this.backoffMs.length - 1)];
    this.attempts += 1;
    this.setTimer(() => this.connect(), delay);
  }

  private flushBuffer(): void {
    const pending = this.buffer;
    this.buffer = [];
    for (const batch of pending) {
      this.sendBatch(batch);
    }
  }

  private sendBatch(batch: PendingBatch): void {
    this.sendRaw({
      type: "samples",
      stream_id: batch.streamId,
      timestamps: batch.timestamps,
      values: batch.values,
    });
  }

  private sendRaw(msg: InletMessage): void {
    this.socket?.send(JSON.stringify(msg));
  }

  private setStatus(status: InletStatus): void {
    if (status !== this.status) {
      this.status = status;
      this.onStatus(status);
    }
  }
}
