/**
 * Agreement-rating prompts: one sentence at a time, responses on a 1 to 5
 * scale entered with the digit keys.  Each response becomes one sample on
 * the rating stream; dismissing a prompt re-queues it.
 */

export interface RatingPrompt {
  sentenceId: number;
  text: string;
}

export interface RatingSample {
  sentenceId: number;
  value: number;
  t: number;
}

export class RatingSession {
  private queue: RatingPrompt[];
  private readonly answered = new Set<number>();

  constructor(
    prompts: RatingPrompt[],
    private readonly emit: (sample: RatingSample) => void,
    private readonly now: () => number = () => Date.now() / 1000,
  ) {
    this.queue = [...prompts];
  }

  current(): RatingPrompt | null {
    return this.queue.length > 0 ? this.queue[0] : null;
  }

  get done(): boolean {
    return this.queue.length === 0;
  }

  /** Record a response for the current prompt; returns false if rejected. */
  respond(value: number): boolean {
    const prompt = this.current();
    if (prompt === null || !Number.isInteger(value) || value < 1 || value > 5) {
      return false;
    }
    if (this.answered.has(prompt.sentenceId)) {
      return false;
    }
    this.answered.add(prompt.sentenceId);
    this.queue.shift();
    this.emit({ sentenceId: prompt.sentenceId, value, t: this.now() });
    return true;
  }

  /** Keyboard entry point; only the digits 1 to 5 do anything. */
  handleKey(key: string): boolean {
    if (!/^[1-5]$/.test(key)) {
      return false;
    }
    return this.respond(Number(key));
  }

  /** Put the current prompt at the back of the queue, unanswered. */
  dismiss(): void {
    const prompt = this.queue.shift();
    if (prompt !== undefined) {
      this.queue.push(prompt);
    }
  }
}
