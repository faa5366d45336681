from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrange.errors import (
    AuthError,
    MalformedResponse,
    ParseError,
    ScriptExhausted,
    TransportError,
    UnknownModel,
)
from agentrange.gateway import (
    ChatRequest,
    ChatResponse,
    HttpChatClient,
    PriceTable,
    ScriptedBackend,
    Usage,
    cost,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
    load_script,
)
from agentrange.messages import Message, ToolCall, assistant, system, user
from agentrange.toolkit import ToolSpec


def make_request(messages=None, tools=(), temperature=0.0):
    return ChatRequest(
        model="default",
        messages=tuple(messages or (system("be helpful"), user("hi"))),
        tool_specs=tuple(tools),
        temperature=temperature,
    )


class TestCost:
    def test_zero_usage_is_free(self, prices):
        assert cost(Usage(0, 0), "default", prices) == 0.0

    def test_unit_scaling_per_million(self, prices):
        assert cost(Usage(1_000_000, 0), "default", prices) == 3.0

    def test_hand_arithmetic_oracle(self, prices):
        # 1000 * 3/1e6 + 500 * 15/1e6 = 0.003 + 0.0075
        assert cost(Usage(1000, 500), "default", prices) == pytest.approx(0.0105, abs=1e-12)

    def test_unknown_model(self, prices):
        with pytest.raises(UnknownModel):
            cost(Usage(1, 1), "missing", prices)

    def test_negative_prices_rejected(self):
        with pytest.raises(ValueError):
            PriceTable({"m": (-1.0, 0.0)})

    @given(
        a=st.tuples(st.integers(0, 10**6), st.integers(0, 10**6)),
        b=st.tuples(st.integers(0, 10**6), st.integers(0, 10**6)),
    )
    def test_cost_linearity(self, a, b):
        prices = PriceTable({"m": (2.5, 7.75)})
        ua, ub = Usage(*a), Usage(*b)
        assert cost(ua + ub, "m", prices) == pytest.approx(
            cost(ua, "m", prices) + cost(ub, "m", prices), abs=1e-9
        )


_arguments = st.dictionaries(
    st.text(min_size=1, max_size=8),
    st.one_of(st.text(max_size=20), st.integers(), st.booleans()),
    max_size=3,
)


def _message_strategy():
    tool_call = st.builds(
        ToolCall,
        id=st.text(min_size=1, max_size=10),
        name=st.text(min_size=1, max_size=10),
        arguments=_arguments,
    )
    assistant_msg = st.builds(
        lambda content, calls: Message(role="assistant", content=content, tool_calls=tuple(calls)),
        st.one_of(st.none(), st.text(max_size=50)),
        st.lists(tool_call, max_size=3),
    )
    simple = st.builds(
        lambda role, content: Message(role=role, content=content),
        st.sampled_from(["user", "system"]),
        st.text(max_size=50),
    )
    tool_msg = st.builds(
        lambda content, call_id, name: Message(
            role="tool", content=content, tool_call_id=call_id, name=name
        ),
        st.text(max_size=50),
        st.text(min_size=1, max_size=10),
        st.text(min_size=1, max_size=10),
    )
    return st.one_of(simple, assistant_msg, tool_msg)


class TestWireFidelity:
    @settings(max_examples=200)
    @given(messages=st.lists(_message_strategy(), max_size=5), temp=st.floats(0, 2))
    def test_request_round_trip(self, messages, temp):
        request = make_request(
            messages=[system("sys")] + messages,
            tools=[
                ToolSpec(
                    name="t",
                    description="d",
                    parameters={"type": "object", "properties": {"q": {"type": "string"}}},
                )
            ],
            temperature=temp,
        )
        assert decode_request(encode_request(request)) == request

    @given(message=_message_strategy().filter(lambda m: m.role == "assistant"
                                              and (m.content is not None or m.tool_calls)))
    def test_response_round_trip(self, message):
        response = ChatResponse(message=message, usage=Usage(10, 5), model_echo="m")
        assert decode_response(encode_response(response)) == response

    def test_tool_call_arguments_stay_a_json_object_on_the_wire(self):
        message = assistant(None, (ToolCall(id="1", name="t", arguments={"a": 1}),))
        wire = encode_response(ChatResponse(message=message, usage=Usage()))
        assert isinstance(wire["choices"][0]["message"]["tool_calls"][0]["function"]["arguments"], str)
        assert decode_response(wire).message.tool_calls[0].arguments == {"a": 1}

    def test_empty_response_rejected(self):
        wire = {"choices": [{"message": {"role": "assistant", "content": None}}]}
        with pytest.raises(MalformedResponse):
            decode_response(wire)

    def test_missing_choices_rejected(self):
        with pytest.raises(MalformedResponse):
            decode_response({"usage": {}})

    def test_bad_tool_arguments_rejected(self):
        wire = {
            "choices": [
                {
                    "message": {
                        "role": "assistant",
                        "content": None,
                        "tool_calls": [
                            {"id": "1", "type": "function",
                             "function": {"name": "t", "arguments": "{not json"}}
                        ],
                    }
                }
            ]
        }
        with pytest.raises(MalformedResponse):
            decode_response(wire)


class TestScriptLoading:
    def test_three_entry_script(self):
        script = load_script([{"text": "a"}, {"text": "b"}, {"text": "c"}])
        assert len(script) == 3

    def test_entry_with_text_and_tool_calls(self):
        script = load_script(
            [{"text": "both", "tool_calls": [{"name": "t", "arguments": {"x": 1}}]}]
        )
        entry = script.entries[0]
        assert entry.text == "both" and entry.tool_calls == (("t", {"x": 1}),)

    def test_malformed_json_arguments_name_the_entry(self):
        with pytest.raises(ParseError, match="entry 1"):
            load_script([{"text": "ok"}, {"tool_calls": [{"name": "t", "arguments": "{oops"}]}])

    def test_empty_entry_rejected(self):
        with pytest.raises(ParseError, match="entry 0"):
            load_script([{}])

    def test_repeat_expands_in_place(self):
        script = load_script([{"text": "x", "repeat": 4}, {"text": "y"}])
        assert len(script) == 5
        assert script.entries[3].text == "x" and script.entries[4].text == "y"

    def test_file_source(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"entries": [{"text": "hi"}]}), encoding="utf-8")
        assert len(load_script(path)) == 1


class TestScriptedBackend:
    def test_plain_text_head(self):
        backend = ScriptedBackend.from_source([{"text": "done"}])
        response = backend.complete(make_request())
        assert response.message.content == "done"
        assert response.message.tool_calls == ()

    def test_exhausted_script(self):
        backend = ScriptedBackend.from_source([{"text": "only"}])
        backend.complete(make_request())
        with pytest.raises(ScriptExhausted):
            backend.complete(make_request())

    def test_tool_call_arguments_parsed_as_object(self):
        backend = ScriptedBackend.from_source(
            [{"tool_calls": [{"name": "generic_linux_command",
                              "arguments": json.dumps({"command": "ls", "args": "-la"})}]}]
        )
        spec = ToolSpec(
            name="generic_linux_command",
            description="",
            parameters={"type": "object", "properties": {"command": {"type": "string"}}},
        )
        response = backend.complete(make_request(tools=[spec]))
        assert len(response.message.tool_calls) == 1
        assert response.message.tool_calls[0].arguments == {"command": "ls", "args": "-la"}

    def test_determinism_entry_k_regardless_of_request(self):
        entries = [{"text": f"e{i}"} for i in range(4)]
        for probe in ("one", "two"):
            backend = ScriptedBackend.from_source(entries)
            seen = [
                backend.complete(make_request(messages=(system("s"), user(probe)))).message.content
                for _ in range(4)
            ]
            assert seen == ["e0", "e1", "e2", "e3"]


class _Transport(httpx.BaseTransport):
    def __init__(self, responder):
        self.responder = responder
        self.calls = 0

    def handle_request(self, request):
        self.calls += 1
        return self.responder(self.calls, request)


def _client_with(responder) -> tuple[HttpChatClient, _Transport]:
    client = HttpChatClient(base_url="http://gateway.test", api_key="k")
    transport = _Transport(responder)
    client._client = httpx.Client(
        base_url="http://gateway.test", transport=transport,
        headers={"Authorization": "Bearer k"},
    )
    return client, transport


class TestHttpClient:
    def test_ok_response(self):
        body = {
            "model": "m",
            "choices": [{"message": {"role": "assistant", "content": "hey"}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 2},
        }
        client, transport = _client_with(lambda n, r: httpx.Response(200, json=body))
        response = client.complete(make_request())
        assert response.message.content == "hey"
        assert response.usage == Usage(7, 2)
        assert transport.calls == 1

    def test_auth_error(self):
        client, _ = _client_with(lambda n, r: httpx.Response(401, json={}))
        with pytest.raises(AuthError):
            client.complete(make_request())

    def test_server_error_is_transport_error(self):
        client, _ = _client_with(lambda n, r: httpx.Response(503, text="down"))
        with pytest.raises(TransportError):
            client.complete(make_request())

    def test_posts_wire_format_to_completions_path(self):
        captured = {}

        def responder(n, request):
            captured["path"] = request.url.path
            captured["body"] = json.loads(request.content)
            captured["auth"] = request.headers.get("authorization")
            return httpx.Response(
                200, json={"choices": [{"message": {"role": "assistant", "content": "ok"}}]}
            )

        client, _ = _client_with(responder)
        client.complete(make_request())
        assert captured["path"] == "/v1/chat/completions"
        assert captured["auth"] == "Bearer k"
        assert captured["body"]["messages"][0]["role"] == "system"

    def test_missing_usage_recorded_as_none(self):
        body = {"choices": [{"message": {"role": "assistant", "content": "x"}}]}
        client, _ = _client_with(lambda n, r: httpx.Response(200, json=body))
        assert client.complete(make_request()).usage is None
