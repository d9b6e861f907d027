/**
 * Layout capture: turns instrumented word spans into LayoutSnapshot
 * records in document coordinates.
 *
 * The page is abstracted behind small interfaces so geometry logic can be
 * tested with stubbed rectangles; `instrumentDocument` below adapts a real
 * DOM to them.
 */
import { LayoutSnapshotJson, layoutSnapshotSchema } from "./schema";
import { segmentText } from "./segment";

/** Viewport-relative rectangle, getBoundingClientRect compatible. */
export interface Rect {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface WordSpan {
  wordId: number;
  sentenceId: number;
  text: string;
  expectedness: number | null;
  getRect(): Rect;
}

export interface ViewportState {
  scrollX: number;
  scrollY: number;
  width: number;
  height: number;
}

export interface InstrumentedPage {
  words(): WordSpan[];
  viewport(): ViewportState;
}

/**
 * One snapshot of the current layout.  Rects come back in viewport
 * coordinates; adding the scroll position converts them to document
 * coordinates, so scrolling alone changes only the viewport record.
 */
export function buildSnapshot(page: InstrumentedPage, t: number): LayoutSnapshotJson {
  const vp = page.viewport();
  const snapshot: LayoutSnapshotJson = {
    t,
    words: page.words().map((w) => {
      const r = w.getRect();
      return {
        word_id: w.wordId,
        sentence_id: w.sentenceId,
        text: w.text,
        bbox: { l: r.left + vp.scrollX, t: r.top + vp.scrollY, w: r.width, h: r.height },
        expectedness: w.expectedness,
      };
    }),
    viewport: { sx: vp.scrollX, sy: vp.scrollY, w: vp.width, h: vp.height },
  };
  return layoutSnapshotSchema.parse(snapshot);
}

export interface CaptureOptions {
  debounceMs?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

/**
 * Emits a snapshot when notified of load, scroll, or resize, debouncing
 * bursts so a smooth scroll produces one snapshot, not hundreds.
 */
export class LayoutCapture {
  private readonly debounceMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;
  private pending: unknown = null;

  constructor(
    private readonly page: InstrumentedPage,
    private readonly emit: (snapshot: LayoutSnapshotJson) => void,
    options: CaptureOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 50;
    this.now = options.now ?? (() => Date.now() / 1000);
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = options.clearTimer ?? ((h) => clearTimeout(h as never));
  }

  /** Call on load, scroll, or resize. */
  notify(): void {
    if (this.pending !== null) {
      this.clearTimer(this.pending);
    }
    this.pending = this.setTimer(() => {
      this.pending = null;
      this.emit(buildSnapshot(this.page, this.now()));
    }, this.debounceMs);
  }

  /** Emit immediately, bypassing the debounce (used on page load). */
  flush(): void {
    if (this.pending !== null) {
      this.clearTimer(this.pending);
      this.pending = null;
    }
    this.emit(buildSnapshot(this.page, this.now()));
  }
}

/**
 * Wrap every word of the document's text content in a measurable span.
 * Word ids follow document order, so re-instrumenting an unchanged DOM
 * reproduces the same ids.  Only used in a real browser; tests drive the
 * interfaces above directly.
 */
export function instrumentDocument(doc: Document, win: Window): InstrumentedPage {
  const spans: WordSpan[] = [];
  const walker = doc.createTreeWalker(doc.body, NodeFilter.SHOW_TEXT);
  const textNodes: Text[] = [];
  for (let node = walker.nextNode(); node !== null; node = walker.nextNode()) {
    if ((node.textContent ?? "").trim().length > 0) {
      textNodes.push(node as Text);
    }
  }
  let nextWordId = 0;
  let sentenceBase = 0;
  for (const node of textNodes) {
    const source = node.textContent ?? "";
    const words = segmentText(source);
    if (words.length === 0) {
      continue;
    }
    const fragment = doc.createDocumentFragment();
    let cursor = 0;
    for (const w of words) {
      if (w.offset > cursor) {
        fragment.appendChild(doc.createTextNode(source.slice(cursor, w.offset)));
      }
      const el = doc.createElement("span");
      el.textContent = w.raw;
      fragment.appendChild(el);
      cursor = w.offset + w.raw.length;
      const wordId = nextWordId++;
      const sentenceId = sentenceBase + w.sentenceId;
      spans.push({
        wordId,
        sentenceId,
        text: w.text,
        expectedness: null,
        getRect: () => el.getBoundingClientRect(),
      });
    }
    if (cursor < source.length) {
      fragment.appendChild(doc.createTextNode(source.slice(cursor)));
    }
    node.parentNode?.replaceChild(fragment, node);
    sentenceBase = spans[spans.length - 1].sentenceId + 1;
  }
  return {
    words: () => spans,
    viewport: () => ({
      scrollX: win.scrollX,
      scrollY: win.scrollY,
      width: win.innerWidth,
      height: win.innerHeight,
    }),
  };
}
