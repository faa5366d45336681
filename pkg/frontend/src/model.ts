import { GapError } from "./types.js";
import type { SessionView, TraceEvent } from "./types.js";
import { transcriptLines } from "./transcript.js";

export interface LiveCounters {
  interactions: number;
  turns: number;
  promptTokens: number;
  completionTokens: number;
  cost: number;
  maxInteractions: number | null;
  budgetUsedFraction: number | null;
  finished: boolean;
  stopReason: string | null;
  activeAgent: string | null;
}

/**
 * One session as the console sees it: a view snapshot plus a seq-gapless
 * event buffer. Every derived value is recomputed purely from the events,
 * so a reconnect that refills the buffer can never disagree with the UI.
 */
export class ConsoleSessionModel {
  readonly sessionId: string;
  view: SessionView | null = null;
  events: TraceEvent[] = [];
  lastSeq = 0;

  constructor(sessionId: string) {
    this.sessionId = sessionId;
  }

  /** Returns false for an already-seen event; throws GapError on a hole. */
  ingest(event: TraceEvent): boolean {
    if (event.session_id !== this.sessionId) return false;
    if (event.seq <= this.lastSeq) return false;
    if (event.seq !== this.lastSeq + 1) {
      throw new GapError(this.lastSeq + 1, event.seq);
    }
    this.events.push(event);
    this.lastSeq = event.seq;
    return true;
  }

  get finished(): boolean {
    return this.events.length > 0 && this.events[this.events.length - 1]!.kind === "session_end";
  }

  counters(): LiveCounters {
    let interactions = 0;
    let turns = 0;
    let promptTokens = 0;
    let completionTokens = 0;
    let cost = 0;
    let maxInteractions: number | null = null;
    let stopReason: string | null = null;
    let activeAgent: string | null = null;
    for (const event of this.events) {
      switch (event.kind) {
        case "session_start":
          maxInteractions = event.payload.max_interactions ?? null;
          activeAgent = event.payload.agent ?? null;
          break;
        case "interaction_start":
          interactions += 1;
          activeAgent = event.payload.agent ?? activeAgent;
          break;
        case "model_response":
          promptTokens += event.payload.usage?.prompt_tokens ?? 0;
          completionTokens += event.payload.usage?.completion_tokens ?? 0;
          cost += event.payload.cost ?? 0;
          break;
        case "turn_end":
          turns += 1;
          break;
        case "handoff":
          activeAgent = event.payload.target ?? activeAgent;
          break;
        case "session_end":
          stopReason = event.payload.stop_reason ?? null;
          break;
      }
    }
    return {
      interactions,
      turns,
      promptTokens,
      completionTokens,
      cost,
      maxInteractions,
      budgetUsedFraction: maxInteractions ? interactions / maxInteractions : null,
      finished: this.finished,
      stopReason,
      activeAgent,
    };
  }

  transcriptLines(): string[] {
    return transcriptLines(this.events);
  }

  /** Control buttons stay usable only while the session can still act. */
  controlsEnabled(): boolean {
    return !this.finished;
  }
}
