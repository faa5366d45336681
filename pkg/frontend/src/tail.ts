import type { ApiClient } from "./api.js";
import type { ConsoleSessionModel } from "./model.js";
import { GapError } from "./types.js";

export interface TailOptions {
  /** delay before a reconnect attempt */
  retryDelayMs?: number;
  /** polling interval once streaming is declared unavailable */
  pollIntervalMs?: number;
  /** consecutive fruitless stream failures before falling back to polling */
  streamFailureLimit?: number;
  onStatus?: (status: string) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Keeps one session model fed with events until session_end.
 *
 * Reconnects resume from the model's last seq, and the model drops
 * duplicates, so a dropped or force-closed connection never produces gaps
 * or repeats. When streaming keeps failing outright the tail degrades to
 * 1-second polling of the buffered-events endpoint.
 */
export class SessionTail {
  private controller: AbortController | null = null;
  private stopped = false;
  connections = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly model: ConsoleSessionModel,
    private readonly options: TailOptions = {},
  ) {}

  /** Abort the current connection; the run loop reconnects from last seq. */
  forceReconnect(): void {
    this.controller?.abort();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  async run(): Promise<void> {
    const retryDelay = this.options.retryDelayMs ?? 250;
    const failureLimit = this.options.streamFailureLimit ?? 3;
    const sleep = this.options.sleep ?? defaultSleep;
    let fruitlessFailures = 0;
    while (!this.stopped && !this.model.finished) {
      this.controller = new AbortController();
      const seqBefore = this.model.lastSeq;
      this.connections += 1;
      this.options.onStatus?.(`connecting from seq ${seqBefore}`);
      try {
        await this.api.streamEvents(
          this.model.sessionId,
          this.model.lastSeq,
          (event) => this.ingest(event),
          this.controller.signal,
        );
        if (this.model.finished) return;
        // clean close without session_end: server restarted; retry
      } catch (error) {
        if (this.stopped) return;
        if (error instanceof GapError) {
          // refetch from last good seq; the duplicate filter absorbs overlap
          this.options.onStatus?.("gap detected; resyncing");
        } else {
          this.options.onStatus?.(`stream dropped: ${String(error)}`);
          if (this.model.lastSeq === seqBefore) {
            fruitlessFailures += 1;
          } else {
            fruitlessFailures = 0;
          }
          if (fruitlessFailures >= failureLimit) {
            this.options.onStatus?.("streaming unavailable; polling");
            return this.pollLoop(sleep);
          }
        }
      }
      await sleep(retryDelay);
    }
  }

  private ingest(event: import("./types.js").TraceEvent): void {
    if (!this.model.ingest(event)) return;
  }

  private async pollLoop(sleep: (ms: number) => Promise<void>): Promise<void> {
    const interval = this.options.pollIntervalMs ?? 1000;
    while (!this.stopped && !this.model.finished) {
      try {
        const events = await this.api.fetchEventsOnce(this.model.sessionId, this.model.lastSeq);
        for (const event of events) this.model.ingest(event);
      } catch (error) {
        this.options.onStatus?.(`poll failed: ${String(error)}`);
      }
      if (this.model.finished) return;
      await sleep(interval);
    }
  }
}
