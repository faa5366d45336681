// Canonical transcript rendering. The CLI's replay command implements the
// same line format; the two renderings of one session's events must match
// byte for byte, so keep formatting free of locale and float surprises.

import type { TraceEvent } from "./types.js";

// compact JSON with recursively sorted keys, matching the server's
// sort_keys + (",", ":") encoding
export function compactJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(compactJson).join(",") + "]";
  }
  const entries = Object.keys(value as Record<string, unknown>)
    .sort()
    .map((key) => JSON.stringify(key) + ":" + compactJson((value as Record<string, unknown>)[key]));
  return "{" + entries.join(",") + "}";
}

function outputBlock(lines: string[], head: string | undefined, prefix: string): void {
  if (!head) return;
  // split on "\n" only, dropping one trailing empty segment; the CLI replay
  // renderer applies the identical rule, keeping transcripts byte-equal
  const segments = head.split("\n");
  if (segments.length > 0 && segments[segments.length - 1] === "") {
    segments.pop();
  }
  for (const line of segments) {
    lines.push(`${prefix}${line}`);
  }
}

export function transcriptLines(events: Iterable<TraceEvent>): string[] {
  const lines: string[] = [];
  for (const event of events) {
    const payload = event.payload ?? {};
    switch (event.kind) {
      case "session_start":
        lines.push(
          `=== session ${event.session_id} pattern=${payload.pattern} entry=${payload.agent}`,
        );
        lines.push(`[task] ${payload.task ?? ""}`);
        break;
      case "interaction_start":
        lines.push(`--- interaction ${payload.index} agent=${payload.agent}`);
        break;
      case "model_response": {
        const message = payload.message ?? {};
        if (message.content) {
          lines.push(`[assistant] ${message.content}`);
        }
        for (const call of message.tool_calls ?? []) {
          const fn = call.function ?? {};
          let args: unknown = fn.arguments ?? "{}";
          if (typeof args === "string") {
            try {
              args = JSON.parse(args);
            } catch {
              args = {};
            }
          }
          lines.push(`[tool_call] ${fn.name}(${compactJson(args)})`);
        }
        break;
      }
      case "tool_exec": {
        const exit = payload.exit_code ?? null;
        lines.push(
          `[tool:${payload.name}] status=${payload.status} exit=${exit === null ? "-" : exit}`,
        );
        outputBlock(lines, payload.stdout?.head, "    ");
        outputBlock(lines, payload.stderr?.head, "   !");
        break;
      }
      case "handoff":
        lines.push(`[handoff] ${payload.source} -> ${payload.target} via ${payload.handoff}`);
        break;
      case "control_signal": {
        let text = `[control] ${payload.kind}`;
        if (payload.payload) text += `: ${payload.payload}`;
        lines.push(text);
        break;
      }
      case "turn_end":
        lines.push(`--- turn end: ${payload.termination}`);
        break;
      case "session_end": {
        const cost = Number(payload.total_cost ?? 0);
        lines.push(
          `=== session end: ${payload.stop_reason} ` +
            `interactions=${payload.total_interactions} ` +
            `turns=${payload.total_turns} ` +
            `tokens=${payload.prompt_tokens}+${payload.completion_tokens} ` +
            `cost=$${cost.toFixed(6)}`,
        );
        break;
      }
    }
  }
  return lines;
}

export function renderTranscript(events: Iterable<TraceEvent>): string {
  return transcriptLines(events).join("\n") + "\n";
}
