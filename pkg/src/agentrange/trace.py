"""Append-only session event log: sinks, aggregation, exact replay.

One JSON object per line, UTF-8, stable key order. Large tool outputs are
digested in events (first 4 KiB + SHA-256) and stored whole as side files.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import CorruptRecord, IncompleteStream, OrderViolation

EVENT_KINDS = (
    "session_start",
    "interaction_start",
    "model_request",
    "model_response",
    "tool_exec",
    "handoff",
    "control_signal",
    "turn_end",
    "session_end",
)

DIGEST_HEAD_BYTES = 4096

_FIELD_ORDER = ("session_id", "seq", "ts_ns", "kind", "payload")


@dataclass(frozen=True)
class TraceEvent:
    session_id: str
    seq: int
    ts_ns: int
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {self.kind!r}")
        if self.seq < 1:
            raise ValueError("seq starts at 1")

    def to_json(self) -> str:
        raw = {name: getattr(self, name) for name in _FIELD_ORDER}
        return json.dumps(raw, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TraceEvent":
        raw = json.loads(line)
        return cls(
            session_id=raw["session_id"],
            seq=raw["seq"],
            ts_ns=raw["ts_ns"],
            kind=raw["kind"],
            payload=raw.get("payload", {}),
        )


@dataclass(frozen=True)
class SessionSummary:
    total_interactions: int
    total_turns: int
    elapsed_seconds: float
    prompt_tokens: int
    completion_tokens: int
    total_cost_dollars: float
    stop_reason: str | None
    solved: bool | None = None


def digest_text(text: str) -> dict[str, Any]:
    """Bounded representation of possibly-large tool output."""
    data = text.encode("utf-8")
    return {
        "head": data[:DIGEST_HEAD_BYTES].decode("utf-8", errors="replace"),
        "sha256": hashlib.sha256(data).hexdigest(),
        "bytes": len(data),
    }


class TraceSink:
    """Base sink: validates per-session ordering, then stores the event."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._last_seq: dict[str, int] = {}

    def append(self, event: TraceEvent) -> None:
        with self._lock:
            last = self._last_seq.get(event.session_id, 0)
            if event.seq <= last:
                raise OrderViolation(
                    f"session {event.session_id}: seq {event.seq} after {last}"
                )
            self._last_seq[event.session_id] = event.seq
            self._store(event)

    def store_artifact(self, session_id: str, name: str, data: bytes) -> None:
        """Keep a full tool output out of band; default drops it."""

    def _store(self, event: TraceEvent) -> None:
        raise NotImplementedError


class MemorySink(TraceSink):
    """In-process sink; supports live tailing through a condition variable."""

    def __init__(self) -> None:
        super().__init__()
        self._events: dict[str, list[TraceEvent]] = {}
        self._artifacts: dict[tuple[str, str], bytes] = {}
        self.changed = threading.Condition()

    def _store(self, event: TraceEvent) -> None:
        self._events.setdefault(event.session_id, []).append(event)
        with self.changed:
            self.changed.notify_all()

    def store_artifact(self, session_id: str, name: str, data: bytes) -> None:
        self._artifacts[(session_id, name)] = data

    def events(self, session_id: str, from_seq: int = 0) -> list[TraceEvent]:
        with self._lock:
            return [e for e in self._events.get(session_id, []) if e.seq > from_seq]

    def artifact(self, session_id: str, name: str) -> bytes | None:
        return self._artifacts.get((session_id, name))


class JsonlSink(TraceSink):
    """One `<session_id>.trace.jsonl` file per session inside a directory.

    A single instance multiplexes appends from concurrent sessions; each
    event is flushed so prior records survive a crashed writer.
    """

    def __init__(self, directory: str | Path):
        super().__init__()
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._handles: dict[str, Any] = {}

    def trace_path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.trace.jsonl"

    def artifacts_dir(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.artifacts"

    def _store(self, event: TraceEvent) -> None:
        handle = self._handles.get(event.session_id)
        if handle is None:
            handle = self.trace_path(event.session_id).open("a", encoding="utf-8")
            self._handles[event.session_id] = handle
        handle.write(event.to_json() + "\n")
        handle.flush()
        if event.kind == "session_end":
            handle.close()
            del self._handles[event.session_id]

    def store_artifact(self, session_id: str, name: str, data: bytes) -> None:
        directory = self.artifacts_dir(session_id)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / name).write_bytes(data)

    def close(self) -> None:
        with self._lock:
            for handle in self._handles.values():
                handle.close()
            self._handles.clear()


class TeeSink(TraceSink):
    """Fan out every event to several sinks (e.g. memory + JSONL)."""

    def __init__(self, *sinks: TraceSink):
        super().__init__()
        self.sinks = sinks

    def _store(self, event: TraceEvent) -> None:
        for sink in self.sinks:
            sink.append(event)

    def store_artifact(self, session_id: str, name: str, data: bytes) -> None:
        for sink in self.sinks:
            sink.store_artifact(session_id, name, data)


def emit(event: TraceEvent, sink: TraceSink) -> None:
    """Durably append one event; ordering violations are rejected."""
    sink.append(event)


def summarize(events: Iterable[TraceEvent]) -> SessionSummary:
    """Single fold over one session's complete, ordered event stream."""
    interactions = 0
    turns = 0
    prompt = 0
    completion = 0
    total_cost = 0.0
    elapsed = 0.0
    stop_reason: str | None = None
    solved: bool | None = None
    saw_end = False
    for event in events:
        if event.kind == "interaction_start":
            interactions += 1
        elif event.kind == "model_response":
            usage = event.payload.get("usage", {})
            prompt += int(usage.get("prompt_tokens", 0))
            completion += int(usage.get("completion_tokens", 0))
            total_cost += float(event.payload.get("cost", 0.0))
        elif event.kind == "turn_end":
            turns += 1
        elif event.kind == "session_end":
            saw_end = True
            elapsed = float(event.payload.get("elapsed_seconds", 0.0))
            stop_reason = event.payload.get("stop_reason")
            solved = event.payload.get("solved")
    if not saw_end:
        raise IncompleteStream("event stream has no session_end")
    return SessionSummary(
        total_interactions=interactions,
        total_turns=turns,
        elapsed_seconds=elapsed,
        prompt_tokens=prompt,
        completion_tokens=completion,
        total_cost_dollars=total_cost,
        stop_reason=stop_reason,
        solved=solved,
    )


def replay(path: str | Path) -> list[TraceEvent]:
    """Decode a trace log back into its exact event sequence.

    A bad record raises CorruptRecord carrying the byte offset and every
    event decoded before it.
    """
    events: list[TraceEvent] = []
    offset = 0
    with Path(path).open("rb") as handle:
        for line in handle:
            stripped = line.strip()
            if stripped:
                try:
                    events.append(TraceEvent.from_json(stripped.decode("utf-8")))
                except (ValueError, KeyError) as exc:
                    raise CorruptRecord(
                        f"bad trace record at byte {offset}: {exc}", offset, events
                    ) from exc
            offset += len(line)
    return events
