"""Chat-completion backends and cost accounting.

Two backends share one interface: a live HTTP client speaking the
OpenAI-compatible chat-completions wire format, and a deterministic scripted
backend that replays a fixed response queue for tests and offline runs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from .errors import (
    AuthError,
    MalformedResponse,
    ParseError,
    ScriptExhausted,
    TransportError,
    UnknownModel,
)
from .messages import Message, ToolCall
from .toolkit import ToolSpec

ENV_API_KEY = "AGENTRANGE_API_KEY"
ENV_BASE_URL = "AGENTRANGE_BASE_URL"
ENV_MODEL = "AGENTRANGE_MODEL"

COMPLETIONS_PATH = "/v1/chat/completions"


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
        )


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Message, ...]
    tool_specs: tuple[ToolSpec, ...] = ()
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be nonempty")
        if self.messages[0].role != "system":
            raise ValueError("first message must be the system prompt")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")


@dataclass(frozen=True)
class ChatResponse:
    message: Message
    usage: Usage | None = None
    model_echo: str = ""

    def __post_init__(self) -> None:
        if self.message.content is None and not self.message.tool_calls:
            raise ValueError("response needs content or tool calls")


class PriceTable:
    """Per-model (prompt, completion) dollar prices per million tokens."""

    def __init__(self, prices: dict[str, tuple[float, float]] | None = None):
        self._prices = dict(prices or {})
        for model, (p, c) in self._prices.items():
            if p < 0 or c < 0:
                raise ValueError(f"negative price for {model}")

    def __contains__(self, model: str) -> bool:
        return model in self._prices

    def get(self, model: str) -> tuple[float, float]:
        try:
            return self._prices[model]
        except KeyError:
            raise UnknownModel(f"no prices for model: {model}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "PriceTable":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            {
                m: (float(v["prompt"]), float(v["completion"]))
                for m, v in raw.items()
                if not m.startswith("_")  # allow "_comment" keys in config files
            }
        )


def cost(usage: Usage, model: str, prices: PriceTable) -> float:
    """Dollar cost of one usage record under the table's per-1M-token prices."""
    prompt_price, completion_price = prices.get(model)
    return usage.prompt_tokens / 1e6 * prompt_price + usage.completion_tokens / 1e6 * completion_price


# --- wire codec ---

def encode_message(message: Message) -> dict[str, Any]:
    raw: dict[str, Any] = {"role": message.role, "content": message.content}
    if message.tool_calls:
        raw["tool_calls"] = [
            {
                "id": call.id,
                "type": "function",
                "function": {"name": call.name, "arguments": json.dumps(call.arguments)},
            }
            for call in message.tool_calls
        ]
    if message.tool_call_id is not None:
        raw["tool_call_id"] = message.tool_call_id
    if message.name is not None:
        raw["name"] = message.name
    return raw


def decode_message(raw: dict[str, Any]) -> Message:
    calls = []
    for item in raw.get("tool_calls") or []:
        function = item.get("function", {})
        arguments = function.get("arguments", "{}")
        if isinstance(arguments, str):
            try:
                arguments = json.loads(arguments)
            except json.JSONDecodeError as exc:
                raise MalformedResponse(f"tool call arguments are not JSON: {exc}") from exc
        if not isinstance(arguments, dict):
            raise MalformedResponse("tool call arguments must decode to an object")
        calls.append(ToolCall(id=item.get("id", ""), name=function.get("name", ""), arguments=arguments))
    return Message(
        role=raw.get("role", ""),
        content=raw.get("content"),
        tool_calls=tuple(calls),
        tool_call_id=raw.get("tool_call_id"),
        name=raw.get("name"),
    )


def encode_request(request: ChatRequest) -> dict[str, Any]:
    raw: dict[str, Any] = {
        "model": request.model,
        "messages": [encode_message(m) for m in request.messages],
        "temperature": request.temperature,
    }
    if request.tool_specs:
        raw["tools"] = [
            {
                "type": "function",
                "function": {
                    "name": spec.name,
                    "description": spec.description,
                    "parameters": spec.parameters,
                },
            }
            for spec in request.tool_specs
        ]
    return raw


def decode_request(raw: dict[str, Any]) -> ChatRequest:
    specs = tuple(
        ToolSpec(
            name=item["function"]["name"],
            description=item["function"].get("description", ""),
            parameters=item["function"].get("parameters", {}),
        )
        for item in raw.get("tools") or []
    )
    return ChatRequest(
        model=raw["model"],
        messages=tuple(decode_message(m) for m in raw["messages"]),
        tool_specs=specs,
        temperature=raw.get("temperature", 0.0),
    )


def encode_response(response: ChatResponse) -> dict[str, Any]:
    raw: dict[str, Any] = {
        "model": response.model_echo,
        "choices": [{"index": 0, "message": encode_message(response.message)}],
    }
    if response.usage is not None:
        raw["usage"] = {
            "prompt_tokens": response.usage.prompt_tokens,
            "completion_tokens": response.usage.completion_tokens,
        }
    return raw


def decode_response(raw: dict[str, Any]) -> ChatResponse:
    choices = raw.get("choices")
    if not choices:
        raise MalformedResponse("response has no choices")
    try:
        message = decode_message(choices[0]["message"])
    except KeyError as exc:
        raise MalformedResponse(f"response choice missing field: {exc}") from exc
    if message.content is None and not message.tool_calls:
        raise MalformedResponse("response message has neither content nor tool calls")
    usage_raw = raw.get("usage")
    usage = None
    if usage_raw is not None:
        usage = Usage(
            prompt_tokens=int(usage_raw.get("prompt_tokens", 0)),
            completion_tokens=int(usage_raw.get("completion_tokens", 0)),
        )
    return ChatResponse(message=message, usage=usage, model_echo=raw.get("model", ""))


# --- backends ---

class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@dataclass(frozen=True)
class ScriptEntry:
    text: str | None = None
    tool_calls: tuple[tuple[str, dict[str, Any]], ...] = ()
    usage: Usage | None = None


@dataclass(frozen=True)
class Script:
    entries: tuple[ScriptEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)


def load_script(source: str | Path | dict | list) -> Script:
    """Parse a script document into an ordered, immutable response queue.

    Each entry carries `text` and/or `tool_calls` (name + JSON-object
    arguments), optional `usage`, and an optional `repeat` count that
    expands the entry in place.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
        else:
            raw = json.loads(str(source))
    else:
        raw = source
    if isinstance(raw, dict):
        raw = raw.get("entries", [])
    if not isinstance(raw, list):
        raise ParseError("script document must be a list of entries")

    entries: list[ScriptEntry] = []
    for index, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ParseError(f"entry {index}: must be an object")
        text = item.get("text")
        calls: list[tuple[str, dict[str, Any]]] = []
        for call_index, call in enumerate(item.get("tool_calls") or []):
            name = call.get("name")
            if not name:
                raise ParseError(f"entry {index}: tool call {call_index} has no name")
            arguments = call.get("arguments", {})
            if isinstance(arguments, str):
                try:
                    arguments = json.loads(arguments)
                except json.JSONDecodeError as exc:
                    raise ParseError(
                        f"entry {index}: tool call {call_index} arguments are not JSON: {exc}"
                    ) from exc
            if not isinstance(arguments, dict):
                raise ParseError(f"entry {index}: tool call {call_index} arguments must be an object")
            calls.append((str(name), arguments))
        if text is None and not calls:
            raise ParseError(f"entry {index}: needs text or tool_calls")
        usage_raw = item.get("usage")
        usage = None
        if usage_raw is not None:
            usage = Usage(
                prompt_tokens=int(usage_raw.get("prompt_tokens", 0)),
                completion_tokens=int(usage_raw.get("completion_tokens", 0)),
            )
        repeat = int(item.get("repeat", 1))
        if repeat < 1:
            raise ParseError(f"entry {index}: repeat must be >= 1")
        entry = ScriptEntry(text=text, tool_calls=tuple(calls), usage=usage)
        entries.extend([entry] * repeat)
    return Script(entries=tuple(entries))


class ScriptedBackend:
    """Replays script entries in order, ignoring request content.

    Owns a cursor, so each session needs its own instance.
    """

    def __init__(self, script: Script):
        self._script = script
        self._cursor = 0

    @classmethod
    def from_source(cls, source: str | Path | dict | list) -> "ScriptedBackend":
        return cls(load_script(source))

    def complete(self, request: ChatRequest) -> ChatResponse:
        if self._cursor >= len(self._script.entries):
            raise ScriptExhausted(f"script exhausted after {self._cursor} completions")
        entry = self._script.entries[self._cursor]
        self._cursor += 1
        calls = tuple(
            ToolCall(id=f"call_{self._cursor}_{i}", name=name, arguments=arguments)
            for i, (name, arguments) in enumerate(entry.tool_calls)
        )
        message = Message(role="assistant", content=entry.text, tool_calls=calls)
        return ChatResponse(message=message, usage=entry.usage, model_echo=request.model)


@dataclass
class HttpChatClient:
    """Live OpenAI-compatible client; shareable across sessions."""

    base_url: str
    api_key: str = ""
    timeout: float = 120.0
    _client: httpx.Client = field(init=False, repr=False)

    def __post_init__(self) -> None:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(
            base_url=self.base_url.rstrip("/"), headers=headers, timeout=self.timeout
        )

    @classmethod
    def from_env(cls) -> "HttpChatClient":
        base_url = os.environ.get(ENV_BASE_URL, "")
        if not base_url:
            raise TransportError(f"{ENV_BASE_URL} is not set")
        return cls(base_url=base_url, api_key=os.environ.get(ENV_API_KEY, ""))

    def complete(self, request: ChatRequest) -> ChatResponse:
        try:
            reply = self._client.post(COMPLETIONS_PATH, json=encode_request(request))
        except httpx.HTTPError as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        if reply.status_code in (401, 403):
            raise AuthError(f"backend rejected credentials (HTTP {reply.status_code})")
        if reply.status_code >= 500 or reply.status_code == 429:
            raise TransportError(f"backend unavailable (HTTP {reply.status_code})")
        if reply.status_code != 200:
            raise MalformedResponse(f"unexpected HTTP status {reply.status_code}: {reply.text[:200]}")
        try:
            raw = reply.json()
        except ValueError as exc:
            raise MalformedResponse(f"response body is not JSON: {exc}") from exc
        return decode_response(raw)

    def close(self) -> None:
        self._client.close()
