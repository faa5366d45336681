"""Canonical text transcript rendered from trace events.

The web console implements the same line format; the two renderings of one
session's events must be byte-identical, so keep this free of any local
state, wall-clock text, or locale-dependent formatting.
"""

from __future__ import annotations

import json
from typing import Iterable

from .trace import TraceEvent


def _compact(value: object) -> str:
    return json.dumps(value, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _output_block(lines: list[str], head: str, prefix: str) -> None:
    if not head:
        return
    # split on "\n" only, dropping one trailing empty segment: the console's
    # renderer applies the identical rule, keeping transcripts byte-equal
    segments = head.split("\n")
    if segments and segments[-1] == "":
        segments.pop()
    for line in segments:
        lines.append(f"{prefix}{line}")


def transcript_lines(events: Iterable[TraceEvent]) -> list[str]:
    lines: list[str] = []
    for event in events:
        payload = event.payload
        if event.kind == "session_start":
            lines.append(
                f"=== session {event.session_id} pattern={payload.get('pattern')} "
                f"entry={payload.get('agent')}"
            )
            lines.append(f"[task] {payload.get('task', '')}")
        elif event.kind == "interaction_start":
            lines.append(f"--- interaction {payload.get('index')} agent={payload.get('agent')}")
        elif event.kind == "model_response":
            message = payload.get("message", {})
            content = message.get("content")
            if content:
                lines.append(f"[assistant] {content}")
            for call in message.get("tool_calls") or []:
                function = call.get("function", {})
                arguments = function.get("arguments", "{}")
                if isinstance(arguments, str):
                    try:
                        arguments = json.loads(arguments)
                    except json.JSONDecodeError:
                        arguments = {}
                lines.append(f"[tool_call] {function.get('name')}({_compact(arguments)})")
        elif event.kind == "tool_exec":
            exit_code = payload.get("exit_code")
            lines.append(
                f"[tool:{payload.get('name')}] status={payload.get('status')} "
                f"exit={'-' if exit_code is None else exit_code}"
            )
            _output_block(lines, payload.get("stdout", {}).get("head", ""), "    ")
            _output_block(lines, payload.get("stderr", {}).get("head", ""), "   !")
        elif event.kind == "handoff":
            lines.append(
                f"[handoff] {payload.get('source')} -> {payload.get('target')} "
                f"via {payload.get('handoff')}"
            )
        elif event.kind == "control_signal":
            text = f"[control] {payload.get('kind')}"
            if payload.get("payload"):
                text += f": {payload.get('payload')}"
            lines.append(text)
        elif event.kind == "turn_end":
            lines.append(f"--- turn end: {payload.get('termination')}")
        elif event.kind == "session_end":
            cost = float(payload.get("total_cost", 0.0))
            lines.append(
                f"=== session end: {payload.get('stop_reason')} "
                f"interactions={payload.get('total_interactions')} "
                f"turns={payload.get('total_turns')} "
                f"tokens={payload.get('prompt_tokens')}+{payload.get('completion_tokens')} "
                f"cost=${cost:.6f}"
            )
    return lines


def render_transcript(events: Iterable[TraceEvent]) -> str:
    return "\n".join(transcript_lines(events)) + "\n"
