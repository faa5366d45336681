import { describe, expect, test } from "vitest";

import { ConsoleSessionModel } from "./model.js";
import { GapError } from "./types.js";
import type { TraceEvent } from "./types.js";

function event(seq: number, kind: string, payload: Record<string, any> = {}): TraceEvent {
  return { session_id: "s1", seq, ts_ns: 1000 + seq, kind, payload };
}

function started(model: ConsoleSessionModel): ConsoleSessionModel {
  model.ingest(event(1, "session_start", { pattern: "p", agent: "a", task: "t", max_interactions: 10 }));
  return model;
}

describe("ConsoleSessionModel", () => {
  test("accepts contiguous events and drops duplicates", () => {
    const model = started(new ConsoleSessionModel("s1"));
    expect(model.ingest(event(2, "interaction_start", { index: 0, agent: "a" }))).toBe(true);
    expect(model.ingest(event(2, "interaction_start", { index: 0, agent: "a" }))).toBe(false);
    expect(model.lastSeq).toBe(2);
    expect(model.events).toHaveLength(2);
  });

  test("throws on a gap so the tail can resync", () => {
    const model = started(new ConsoleSessionModel("s1"));
    expect(() => model.ingest(event(4, "turn_end", { termination: "no_more_actions" }))).toThrow(
      GapError,
    );
  });

  test("ignores events for other sessions", () => {
    const model = started(new ConsoleSessionModel("s1"));
    const foreign = { ...event(2, "turn_end"), session_id: "other" };
    expect(model.ingest(foreign)).toBe(false);
  });

  test("counters are a pure fold over events", () => {
    const model = started(new ConsoleSessionModel("s1"));
    model.ingest(event(2, "interaction_start", { index: 0, agent: "a" }));
    model.ingest(
      event(3, "model_response", {
        message: { role: "assistant", content: "hi" },
        usage: { prompt_tokens: 100, completion_tokens: 20 },
        cost: 0.01,
      }),
    );
    model.ingest(event(4, "turn_end", { termination: "no_more_actions" }));
    const counters = model.counters();
    expect(counters.interactions).toBe(1);
    expect(counters.turns).toBe(1);
    expect(counters.promptTokens).toBe(100);
    expect(counters.cost).toBeCloseTo(0.01, 12);
    expect(counters.budgetUsedFraction).toBeCloseTo(0.1, 12);
    expect(counters.finished).toBe(false);
  });

  test("session_end finishes the model and disables controls", () => {
    const model = started(new ConsoleSessionModel("s1"));
    expect(model.controlsEnabled()).toBe(true);
    model.ingest(
      event(2, "session_end", {
        stop_reason: "completed",
        total_interactions: 0,
        total_turns: 0,
        prompt_tokens: 0,
        completion_tokens: 0,
        total_cost: 0,
        elapsed_seconds: 0.5,
      }),
    );
    expect(model.finished).toBe(true);
    expect(model.controlsEnabled()).toBe(false);
    expect(model.counters().stopReason).toBe("completed");
  });

  test("handoff moves the live agent counter", () => {
    const model = started(new ConsoleSessionModel("s1"));
    model.ingest(event(2, "handoff", { handoff: "h", source: "a", target: "b" }));
    expect(model.counters().activeAgent).toBe("b");
  });
});
