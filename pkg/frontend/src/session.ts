/** In-memory session state: the append-only history of edit attempts.
 *
 * Each attempt stores a defensive copy of the mask so later edits in the
 * canvas (or overlay toggles in the compare view) can never mutate history.
 */

import { MaskGrid } from "./mask.js";
import { EditResponse } from "./api.js";

export interface Attempt {
  readonly index: number;
  readonly mask: MaskGrid;
  readonly prompt: string;
  readonly response: EditResponse;
}

export class Session {
  private attempts: Attempt[] = [];

  get length(): number {
    return this.attempts.length;
  }

  record(mask: MaskGrid, prompt: string, response: EditResponse): Attempt {
    const attempt: Attempt = {
      index: this.attempts.length,
      mask: mask.clone(),
      prompt,
      response,
    };
    this.attempts.push(attempt);
    return attempt;
  }

  get(index: number): Attempt {
    if (!Number.isInteger(index) || index < 0 || index >= this.attempts.length) {
      throw new RangeError(`history index ${index} out of range [0, ${this.attempts.length})`);
    }
    return this.attempts[index];
  }

  compare(i: number, j: number): { a: Attempt; b: Attempt } {
    return { a: this.get(i), b: this.get(j) };
  }

  all(): readonly Attempt[] {
    return this.attempts;
  }

  clear(): void {
    this.attempts = [];
  }
}
