import { describe, expect, it } from "vitest";

import { InletClient, InletStatus, SocketLike } from "../src/inlet";
import { InletMessage } from "../src/schema";

class FakeSocket implements SocketLike {
  sent: InletMessage[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  send(data: string): void {
    this.sent.push(JSON.parse(data));
  }

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.();
  }

  receive(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  drop(): void {
    this.onclose?.();
  }
}

function harness(options: { now?: () => number } = {}) {
  const sockets: FakeSocket[] = [];
  const timers: Array<{ fn: () => void; ms: number }> = [];
  const statuses: InletStatus[] = [];
  const client = new InletClient("ws://127.0.0.1:9/inlet", {
    socketFactory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    setTimer: (fn, ms) => {
      timers.push({ fn, ms });
      return {};
    },
    now: options.now ?? (() => 42.0),
    onStatus: (s) => statuses.push(s),
    backoffMs: [500, 1000, 2000],
    maxBufferedBatches: 3,
  });
  return { client, sockets, timers, statuses };
}

describe("InletClient", () => {
  it("sends hello for every declared stream on connect", () => {
    const { client, sockets } = harness();
    client.declareStream("lay", { kind: "layout", channel_count: 1, channel_format: "string" });
    client.declareStream("rate", { kind: "rating", channel_count: 2 });
    client.connect();
    sockets[0].open();
    const hellos = sockets[0].sent.filter((m) => m.type === "hello");
    expect(hellos.map((m) => (m as { stream_id: string }).stream_id)).toEqual(["lay", "rate"]);
  });

  it("delivers samples in order after the hello", () => {
    const { client, sockets } = harness();
    client.declareStream("rate", { kind: "rating", channel_count: 2 });
    client.connect();
    sockets[0].open();
    client.sendSamples("rate", [1.0], [[3, 4]]);
    client.sendSamples("rate", [2.0], [[5, 2]]);
    const types = sockets[0].sent.map((m) => m.type);
    expect(types).toEqual(["hello", "samples", "samples"]);
    expect(sockets[0].sent[1]).toEqual({
      type: "samples",
      stream_id: "rate",
      timestamps: [1.0],
      values: [[3, 4]],
    });
  });

  it("rejects samples for undeclared streams and ragged batches", () => {
    const { client, sockets } = harness();
    client.declareStream("rate", { kind: "rating", channel_count: 2 });
    client.connect();
    sockets[0].open();
    expect(() => client.sendSamples("ghost", [0.0], [[1, 2]])).toThrow(/not declared/);
    expect(() => client.sendSamples("rate", [0.0, 1.0], [[1, 2]])).toThrow(/equal length/);
  });

  it("answers probe requests with its own clock", () => {
    let t = 100.0;
    const { client, sockets } = harness({ now: () => (t += 0.001) });
    client.declareStream("lay", { kind: "layout", channel_count: 1 });
    client.connect();
    sockets[0].open();
    sockets[0].receive({ type: "probe_request", probe_id: 7, t0: 55.5 });
    const reply = sockets[0].sent.find((m) => m.type === "probe_response") as {
      probe_id: number;
      t0: number;
      t1: number;
      t2: number;
    };
    expect(reply.probe_id).toBe(7);
    expect(reply.t0).toBe(55.5);
    expect(reply.t1).toBeGreaterThan(100.0);
    expect(reply.t2).toBeGreaterThanOrEqual(reply.t1);
  });

  it("ignores unparseable server frames", () => {
    const { client, sockets } = harness();
    client.connect();
    sockets[0].open();
    sockets[0].onmessage?.({ data: "not json" });
    expect(sockets[0].sent).toEqual([]);
  });

  it("reconnects with increasing backoff and re-sends hello", () => {
    const { client, sockets, timers, statuses } = harness();
    client.declareStream("lay", { kind: "layout", channel_count: 1 });
    client.connect();
    sockets[0].open();
    sockets[0].drop();
    expect(timers.map((t) => t.ms)).toEqual([500]);
    timers[0].fn();
    sockets[1].drop(); // connection attempt fails outright
    expect(timers.map((t) => t.ms)).toEqual([500, 1000]);
    timers[1].fn();
    sockets[2].open();
    expect(sockets[2].sent[0].type).toBe("hello");
    expect(statuses).toEqual([
      "connecting", "connected", "disconnected", "connecting",
      "disconnected", "connecting", "connected",
    ]);
  });

  it("caps the retry delay at the last backoff step", () => {
    const { client, sockets, timers } = harness();
    client.connect();
    for (let i = 0; i < 5; i++) {
      sockets[i].drop();
      timers[i].fn();
    }
    expect(timers.map((t) => t.ms)).toEqual([500, 1000, 2000, 2000, 2000]);
  });

  it("buffers samples while disconnected and flushes on reconnect", () => {
    const { client, sockets, timers } = harness();
    client.declareStream("rate", { kind: "rating", channel_count: 2 });
    client.connect();
    sockets[0].open();
    sockets[0].drop();
    client.sendSamples("rate", [1.0], [[3, 5]]);
    client.sendSamples("rate", [2.0], [[7, 1]]);
    timers[0].fn();
    sockets[1].open();
    const samples = sockets[1].sent.filter((m) => m.type === "samples");
    expect(samples.map((m) => (m as { timestamps: number[] }).timestamps)).toEqual([[1.0], [2.0]]);
  });

  it("drops the oldest buffered batch beyond the bound", () => {
    const { client, sockets, timers } = harness();
    client.declareStream("rate", { kind: "rating", channel_count: 2 });
    client.connect();
    sockets[0].open();
    sockets[0].drop();
    for (let i = 0; i < 5; i++) {
      client.sendSamples("rate", [i], [[i, i]]);
    }
    timers[0].fn();
    sockets[1].open();
    const samples = sockets[1].sent.filter((m) => m.type === "samples");
    expect(samples.map((m) => (m as { timestamps: number[] }).timestamps)).toEqual([[2], [3], [4]]);
  });

  it("stays down after an explicit close", () => {
    const { client, sockets, timers } = harness();
    client.connect();
    sockets[0].open();
    client.close();
    expect(sockets[0].closed).toBe(true);
    sockets[0].drop();
    expect(timers).toHaveLength(0);
    expect(client.status).toBe("disconnected");
  });

  it("declaring a stream while connected sends the hello immediately", () => {
    const { client, sockets } = harness();
    client.connect();
    sockets[0].open();
    client.declareStream("late", { kind: "marker", channel_count: 1 });
    expect(sockets[0].sent.at(-1)).toMatchObject({ type: "hello", stream_id: "late" });
  });
});
