import { describe, expect, it } from "vitest";

import { RatingSample, RatingSession } from "../src/ratings";

function session(emitted: RatingSample[], t = 10.0) {
  return new RatingSession(
    [
      { sentenceId: 3, text: "Taxes rose." },
      { sentenceId: 7, text: "Markets fell." },
    ],
    (s) => emitted.push(s),
    () => t,
  );
}

describe("RatingSession", () => {
  it("emits one sample per response and advances", () => {
    const emitted: RatingSample[] = [];
    const s = session(emitted);
    expect(s.current()?.sentenceId).toBe(3);
    expect(s.respond(4)).toBe(true);
    expect(emitted).toEqual([{ sentenceId: 3, value: 4, t: 10.0 }]);
    expect(s.current()?.sentenceId).toBe(7);
  });

  it("accepts only digits 1-5 from the keyboard", () => {
    const emitted: RatingSample[] = [];
    const s = session(emitted);
    expect(s.handleKey("0")).toBe(false);
    expect(s.handleKey("6")).toBe(false);
    expect(s.handleKey("a")).toBe(false);
    expect(s.handleKey("Enter")).toBe(false);
    expect(emitted).toHaveLength(0);
    expect(s.handleKey("5")).toBe(true);
    expect(emitted[0].value).toBe(5);
  });

  it("rejects out-of-scale and non-integer values", () => {
    const emitted: RatingSample[] = [];
    const s = session(emitted);
    expect(s.respond(0)).toBe(false);
    expect(s.respond(6)).toBe(false);
    expect(s.respond(2.5)).toBe(false);
    expect(emitted).toHaveLength(0);
  });

  it("re-queues a dismissed prompt without emitting", () => {
    const emitted: RatingSample[] = [];
    const s = session(emitted);
    s.dismiss();
    expect(emitted).toHaveLength(0);
    expect(s.current()?.sentenceId).toBe(7);
    s.respond(2);
    expect(s.current()?.sentenceId).toBe(3);
    s.respond(1);
    expect(s.done).toBe(true);
    expect(emitted.map((e) => e.sentenceId)).toEqual([7, 3]);
  });

  it("allows only one response per prompt", () => {
    const emitted: RatingSample[] = [];
    const s = session(emitted);
    s.respond(3);
    s.respond(5);
    s.respond(5);
    expect(s.done).toBe(true);
    expect(emitted).toHaveLength(2);
    expect(new Set(emitted.map((e) => e.sentenceId)).size).toBe(2);
  });

  it("ignores responses when no prompts remain", () => {
    const emitted: RatingSample[] = [];
    const s = new RatingSession([], (x) => emitted.push(x));
    expect(s.done).toBe(true);
    expect(s.respond(3)).toBe(false);
    s.dismiss();
    expect(emitted).toHaveLength(0);
  });
});
