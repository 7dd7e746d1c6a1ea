/** Optimistic verdict submission with retry.
 *
 * The UI advances immediately; the POST runs in the background and retries
 * with exponential backoff on network failure, so an offline stretch only
 * delays persistence. The server deduplicates by (qa_id, reviewer), which
 * makes redelivery after a reconnect exactly-once. A 422 is not retried: the
 * field errors surface to the caller instead.
 */

import { ApiError } from "./api.js";
import type { VerdictBody } from "./types.js";

export interface PendingVerdict {
  qaId: string;
  body: VerdictBody;
  attempts: number;
}

export interface QueueOptions {
  baseDelayMs?: number;
  maxDelayMs?: number;
  onFieldErrors?: (qaId: string, errors: unknown) => void;
  onPersisted?: (qaId: string) => void;
  setTimeoutImpl?: (fn: () => void, ms: number) => unknown;
}

type PostFn = (qaId: string, body: VerdictBody) => Promise<unknown>;

export class VerdictQueue {
  private pending: PendingVerdict[] = [];
  private inFlight: Promise<void> | null = null;
  private post: PostFn;
  private opts: Required<Pick<QueueOptions, "baseDelayMs" | "maxDelayMs">> &
    QueueOptions;

  constructor(post: PostFn, opts: QueueOptions = {}) {
    this.post = post;
    this.opts = { baseDelayMs: 500, maxDelayMs: 30_000, ...opts };
  }

  get size(): number {
    return this.pending.length;
  }

  snapshot(): PendingVerdict[] {
    return this.pending.map((p) => ({ ...p }));
  }

  /** Queue a verdict and start draining. Returns immediately. */
  enqueue(qaId: string, body: VerdictBody): void {
    this.pending.push({ qaId, body, attempts: 0 });
    void this.drain();
  }

  private delay(ms: number): Promise<void> {
    const schedule = this.opts.setTimeoutImpl ?? setTimeout;
    return new Promise((resolve) => schedule(resolve, ms));
  }

  /** Resolves when the queue is empty; concurrent callers share one worker. */
  async drain(): Promise<void> {
    while (this.pending.length > 0) {
      if (this.inFlight === null) {
        this.inFlight = this.run().finally(() => {
          this.inFlight = null;
        });
      }
      await this.inFlight;
    }
  }

  private async run(): Promise<void> {
    while (this.pending.length > 0) {
      const head = this.pending[0]!;
      try {
        await this.post(head.qaId, head.body);
        this.pending.shift();
        this.opts.onPersisted?.(head.qaId);
      } catch (err) {
        if (err instanceof ApiError && err.status === 422) {
          // invalid content: drop from the queue, surface the field errors
          this.pending.shift();
          this.opts.onFieldErrors?.(head.qaId, err.fieldErrors);
          continue;
        }
        head.attempts += 1;
        const backoff = Math.min(
          this.opts.maxDelayMs,
          this.opts.baseDelayMs * 2 ** (head.attempts - 1),
        );
        await this.delay(backoff);
      }
    }
  }
}
