/**
 * Text segmentation: whitespace-delimited words, sentences ended by
 * terminal punctuation.  Word ids are assigned in document order, so an
 * unchanged text always yields the same ids.
 */

export interface SegmentedWord {
  wordId: number;
  sentenceId: number;
  /** Word with surrounding punctuation stripped. */
  text: string;
  /** Original token as it appears in the source text. */
  raw: string;
  /** Character offset of the raw token in the source text. */
  offset: number;
}

const TERMINAL = /[.!?]["')\]]*$/;
const STRIP_EDGES = /^[^\p{L}\p{N}]+|[^\p{L}\p{N}]+$/gu;

export function segmentText(source: string): SegmentedWord[] {
  const words: SegmentedWord[] = [];
  let sentenceId = 0;
  let sentenceHasWords = false;
  const tokenPattern = /\S+/g;
  let match: RegExpExecArray | null;
  while ((match = tokenPattern.exec(source)) !== null) {
    const raw = match[0];
    const text = raw.replace(STRIP_EDGES, "");
    if (text.length > 0) {
      words.push({ wordId: words.length, sentenceId, text, raw, offset: match.index });
      sentenceHasWords = true;
    }
    if (TERMINAL.test(raw) && sentenceHasWords) {
      sentenceId += 1;
      sentenceHasWords = false;
    }
  }
  return words;
}

export function sentenceCount(words: SegmentedWord[]): number {
  return words.length === 0 ? 0 : words[words.length - 1].sentenceId + 1;
}
