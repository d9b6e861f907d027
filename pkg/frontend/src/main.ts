/**
 * Browser entry point: instrument the page, stream layout snapshots and
 * agreement ratings to the inlet, and show a status badge.
 */
import { instrumentDocument, LayoutCapture } from "./capture";
import { InletClient } from "./inlet";
import { RatingPrompt, RatingSession } from "./ratings";

export function startCapture(
  doc: Document,
  win: Window,
  inletUrl: string,
  prompts: RatingPrompt[] = [],
): { client: InletClient; capture: LayoutCapture; ratings: RatingSession } {
  const badge = doc.createElement("div");
  badge.style.cssText =
    "position:fixed;top:4px;right:4px;padding:2px 8px;font:12px sans-serif;" +
    "border-radius:4px;color:#fff;background:#888;z-index:99999";
  doc.body.appendChild(badge);

  const client = new InletClient(inletUrl, {
    onStatus: (status) => {
      badge.textContent = status;
      badge.style.background = status === "connected" ? "#2a7" : "#a33";
    },
  });
  client.declareStream("browser-layout", {
    kind: "layout",
    channel_count: 1,
    channel_format: "string",
    channel_labels: ["snapshot_json"],
  });
  client.declareStream("browser-rating", {
    kind: "rating",
    channel_count: 2,
    channel_labels: ["sentence_id", "rating"],
  });
  client.connect();

  const page = instrumentDocument(doc, win);
  const now = () => performance.now() / 1000;
  const capture = new LayoutCapture(
    page,
    (snapshot) =>
      client.sendSamples("browser-layout", [snapshot.t], [[JSON.stringify(snapshot)]]),
    { now },
  );
  win.addEventListener("scroll", () => capture.notify());
  win.addEventListener("resize", () => capture.notify());
  capture.flush();

  const ratings = new RatingSession(
    prompts,
    (sample) =>
      client.sendSamples("browser-rating", [sample.t], [[sample.sentenceId, sample.value]]),
    now,
  );
  doc.addEventListener("keydown", (event) => {
    ratings.handleKey((event as KeyboardEvent).key);
  });

  return { client, capture, ratings };
}
