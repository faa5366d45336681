export interface TraceEvent {
  session_id: string;
  seq: number;
  ts_ns: number;
  kind: string;
  // payload shape depends on kind; see the trace schema on the server side
  payload: Record<string, any>;
}

export interface SessionView {
  session_id: string;
  pattern: string;
  active_agent: string;
  state: "running" | "paused" | "finished";
  interactions_used: number;
  budget: { max_interactions: number };
  total_cost: number;
  started_at: number;
}

export type ControlVerb = "pause" | "inject" | "resume" | "abort";

export interface ControlAck {
  applied: boolean;
  queued: boolean;
  noop: boolean;
  seq: number | null;
}

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class GapError extends Error {
  constructor(public expected: number, public got: number) {
    super(`event gap: expected seq ${expected}, got ${got}`);
  }
}
