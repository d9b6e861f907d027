/**
 * Wire types shared with the recording toolkit.
 *
 * The JSON field names are the external interface: layout snapshots travel
 * as string samples on a layout-kind stream, and the analysis side parses
 * them with exactly these keys.
 */
import { z } from "zod";

export const bboxSchema = z.object({
  l: z.number(),
  t: z.number(),
  w: z.number().nonnegative(),
  h: z.number().nonnegative(),
});

export const wordBoxSchema = z.object({
  word_id: z.number().int().nonnegative(),
  sentence_id: z.number().int().nonnegative(),
  text: z.string(),
  bbox: bboxSchema,
  expectedness: z.number().nullable(),
});

export const viewportSchema = z.object({
  sx: z.number(),
  sy: z.number(),
  w: z.number().nonnegative(),
  h: z.number().nonnegative(),
});

export const layoutSnapshotSchema = z.object({
  t: z.number(),
  words: z.array(wordBoxSchema),
  viewport: viewportSchema,
});

export type BBox = z.infer<typeof bboxSchema>;
export type WordBoxJson = z.infer<typeof wordBoxSchema>;
export type ViewportJson = z.infer<typeof viewportSchema>;
export type LayoutSnapshotJson = z.infer<typeof layoutSnapshotSchema>;

/** Messages understood by the inlet service at ws://HOST:PORT/inlet. */
export interface StreamDeclaration {
  kind: string;
  channel_count: number;
  nominal_rate_hz?: number;
  channel_labels?: string[];
  source_metadata?: Record<string, unknown>;
  channel_format?: "float32" | "double64" | "string";
}

export type InletMessage =
  | { type: "hello"; stream_id: string; info: StreamDeclaration }
  | {
      type: "samples";
      stream_id: string;
      timestamps: number[];
      values: (number[] | string[])[];
    }
  | { type: "probe_request"; probe_id: number; t0: number }
  | { type: "probe_response"; probe_id: number; t0: number; t1: number; t2: number }
  | { type: "bye"; stream_id: string };
