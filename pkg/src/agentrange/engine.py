"""ReACT execution core.

Runs interactions (one model completion plus the tool calls it requests) and
turns (interaction cycles that end when the agent takes no further action)
for one session, enforcing the interaction budget, applying handoffs, and
honoring queued human control signals at interaction boundaries.

Sessions share no state: each owns its history, counters and signal queue,
so any number can run in parallel against one engine.
"""

from __future__ import annotations

import queue
import threading
import uuid
from dataclasses import dataclass
from typing import Any, Callable

from .clock import Clock
from .errors import (
    AuthError,
    BudgetExceeded,
    GatewayError,
    InvalidAgent,
    InvalidBudget,
    InvalidSignal,
    SessionFinished,
    TransportError,
    UnknownHandoff,
    UnknownSession,
)
from .gateway import ChatBackend, ChatRequest, ChatResponse, PriceTable, Usage, cost, encode_message
from .messages import Message, system, tool_reply, user
from .toolkit import ExecPolicy, ToolRegistry, ToolResult, ToolSpec, default_registry
from .trace import (
    DIGEST_HEAD_BYTES,
    MemorySink,
    SessionSummary,
    TraceEvent,
    TraceSink,
    digest_text,
)

RUNNING = "running"
PAUSED = "paused"
FINISHED = "finished"

# turn terminations
NO_MORE_ACTIONS = "no_more_actions"
HANDOFF = "handoff"
BUDGET_EXHAUSTED = "budget_exhausted"
INTERRUPTED = "interrupted"
ERROR = "error"

# run stop reasons
COMPLETED = "completed"
INTERRUPTED_ABORT = "interrupted_abort"

SIGNAL_KINDS = ("pause", "inject", "resume", "abort")


@dataclass(frozen=True)
class Handoff:
    """One edge: invoking `name` as a tool passes control to `target`."""

    name: str
    target: str


@dataclass(frozen=True)
class AgentDef:
    name: str
    instructions: str
    model: str
    tools: tuple[str, ...] = ()
    handoffs: tuple[Handoff, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidAgent("agent name must be nonempty")


@dataclass(frozen=True)
class Budget:
    max_interactions: int = 100
    wall_clock_limit: float | None = None

    def __post_init__(self) -> None:
        if self.max_interactions < 1:
            raise InvalidBudget("max_interactions must be >= 1")
        if self.wall_clock_limit is not None and self.wall_clock_limit <= 0:
            raise InvalidBudget("wall_clock_limit must be positive")


@dataclass(frozen=True)
class ControlSignal:
    kind: str
    payload: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in SIGNAL_KINDS:
            raise InvalidSignal(f"unknown signal kind: {self.kind!r}")
        if self.kind == "inject" and not self.payload:
            raise InvalidSignal("inject requires a nonempty payload")


class SignalAck:
    """Resolved once the engine applies (or no-ops) the queued signal."""

    def __init__(self) -> None:
        self._event = threading.Event()
        self._outcome: dict[str, Any] | None = None

    def _resolve(self, applied: bool, seq: int | None = None, noop: bool = False) -> None:
        self._outcome = {"applied": applied, "seq": seq, "noop": noop}
        self._event.set()

    def wait(self, timeout: float | None = None) -> dict[str, Any] | None:
        if self._event.wait(timeout):
            return self._outcome
        return None


@dataclass
class _QueuedSignal:
    signal: ControlSignal
    ack: SignalAck


@dataclass
class Interaction:
    index: int
    request_snapshot: dict[str, Any]
    response: Message
    tool_results: list[tuple[str, ToolResult]]
    usage: Usage
    wall_time: float
    cost: float
    handoff: str | None = None


@dataclass
class Turn:
    interactions: list[Interaction]
    termination: str

    def __post_init__(self) -> None:
        # An abort can land before the turn's first completion; every other
        # termination implies at least one interaction happened.
        if not self.interactions and self.termination != INTERRUPTED:
            raise ValueError("turn must contain at least one interaction")


@dataclass
class RunResult:
    turns: list[Turn]
    stop_reason: str
    total_interactions: int
    total_cost: float
    elapsed: float


@dataclass(frozen=True)
class SessionView:
    session_id: str
    pattern: str
    active_agent: str
    state: str
    interactions_used: int
    max_interactions: int
    total_cost: float
    started_at_ns: int


class Session:
    """Mutable per-run state; confined to one execution context at a time."""

    def __init__(
        self,
        session_id: str,
        agents: dict[str, AgentDef],
        entry: str,
        task: str,
        budget: Budget,
        backend: ChatBackend,
        pattern_name: str,
    ):
        self.id = session_id
        self.agents = agents
        self.active_agent = entry
        self.task = task
        self.budget = budget
        self.backend = backend
        self.pattern_name = pattern_name
        self.history: list[Message] = [system(agents[entry].instructions), user(task)]
        self.interactions_used = 0
        self.turns_completed = 0
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.cost_total = 0.0
        self.state = RUNNING
        self.stop_reason: str | None = None
        self.solved: bool | None = None
        self.elapsed: float = 0.0
        self.started_at_ns = 0
        self.signals: "queue.Queue[_QueuedSignal]" = queue.Queue()
        self._seq = 0
        self._start_mono = 0.0

    @property
    def active(self) -> AgentDef:
        return self.agents[self.active_agent]

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq


class Engine:
    """Creates and drives sessions against one backend, registry and sink."""

    def __init__(
        self,
        *,
        backend: ChatBackend | None = None,
        registry: ToolRegistry | None = None,
        sink: TraceSink | None = None,
        prices: PriceTable | None = None,
        policy: ExecPolicy | None = None,
        clock: Clock | None = None,
        id_source: Callable[[], str] | None = None,
        temperature: float = 0.0,
        retry_attempts: int = 3,
        retry_base_delay: float = 0.5,
        signal_poll_interval: float = 0.05,
    ):
        self.backend = backend
        self.registry = registry if registry is not None else default_registry()
        self.sink = sink if sink is not None else MemorySink()
        self.prices = prices
        self.policy = policy or ExecPolicy()
        self.clock = clock or Clock()
        self.id_source = id_source or (lambda: uuid.uuid4().hex)
        self.temperature = temperature
        self.retry_attempts = retry_attempts
        self.retry_base_delay = retry_base_delay
        self.signal_poll_interval = signal_poll_interval
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    # --- session lifecycle ---

    def create_session(
        self,
        source: "AgentDef | Any",
        task: str,
        budget: Budget | None = None,
        *,
        backend: ChatBackend | None = None,
    ) -> Session:
        """Fresh session at the entry agent; history = [system, user(task)]."""
        if hasattr(source, "entry") and hasattr(source, "agents"):
            agents = {agent.name: agent for agent in source.agents}
            if len(agents) != len(source.agents):
                raise InvalidAgent("duplicate agent names in pattern")
            entry = source.entry
            pattern_name = source.name
        else:
            agents = {source.name: source}
            entry = source.name
            pattern_name = source.name
        if entry not in agents:
            raise InvalidAgent(f"entry agent {entry!r} not defined")
        self._validate_agents(agents)
        chosen_backend = backend if backend is not None else self.backend
        if chosen_backend is None:
            raise InvalidAgent("no chat backend configured")
        session = Session(
            session_id=self.id_source(),
            agents=agents,
            entry=entry,
            task=task,
            budget=budget if budget is not None else Budget(),
            backend=chosen_backend,
            pattern_name=pattern_name,
        )
        session._start_mono = self.clock.monotonic()
        with self._registry_lock:
            self._sessions[session.id] = session
        session.started_at_ns = self._emit(
            session,
            "session_start",
            {
                "pattern": pattern_name,
                "agent": entry,
                "task": task,
                "instructions": agents[entry].instructions,
                "max_interactions": session.budget.max_interactions,
            },
        ).ts_ns
        return session

    def _validate_agents(self, agents: dict[str, AgentDef]) -> None:
        for agent in agents.values():
            for tool in agent.tools:
                if tool not in self.registry:
                    raise InvalidAgent(f"{agent.name}: unknown tool {tool!r}")
            for handoff in agent.handoffs:
                if handoff.target not in agents:
                    raise InvalidAgent(
                        f"{agent.name}: handoff {handoff.name!r} targets unknown agent {handoff.target!r}"
                    )

    def get_session(self, session_id: str) -> Session:
        with self._registry_lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(session_id) from None

    def views(self) -> list[SessionView]:
        with self._registry_lock:
            sessions = list(self._sessions.values())
        return [self._view(s) for s in sessions]

    def _view(self, session: Session) -> SessionView:
        return SessionView(
            session_id=session.id,
            pattern=session.pattern_name,
            active_agent=session.active_agent,
            state=session.state,
            interactions_used=session.interactions_used,
            max_interactions=session.budget.max_interactions,
            total_cost=session.cost_total,
            started_at_ns=session.started_at_ns,
        )

    def view(self, session_id: str) -> SessionView:
        return self._view(self.get_session(session_id))

    # --- tracing ---

    def _emit(self, session: Session, kind: str, payload: dict[str, Any]) -> TraceEvent:
        event = TraceEvent(
            session_id=session.id,
            seq=session.next_seq(),
            ts_ns=self.clock.now_ns(),
            kind=kind,
            payload=payload,
        )
        self.sink.append(event)
        return event

    # --- control signals ---

    def submit_signal(self, session: Session, signal: ControlSignal) -> SignalAck:
        """Queue a signal; it takes effect at the next interaction boundary."""
        if session.state == FINISHED:
            raise SessionFinished(session.id)
        ack = SignalAck()
        session.signals.put(_QueuedSignal(signal, ack))
        return ack

    def _apply_signal(self, session: Session, queued: _QueuedSignal) -> str | None:
        signal = queued.signal
        if signal.kind == "pause":
            if session.state == RUNNING:
                session.state = PAUSED
                event = self._emit(session, "control_signal", {"kind": "pause"})
                queued.ack._resolve(True, event.seq)
            else:
                queued.ack._resolve(False, noop=True)
        elif signal.kind == "resume":
            if session.state == PAUSED:
                session.state = RUNNING
                event = self._emit(session, "control_signal", {"kind": "resume"})
                queued.ack._resolve(True, event.seq)
            else:
                queued.ack._resolve(False, noop=True)
        elif signal.kind == "inject":
            session.history.append(user(signal.payload or ""))
            event = self._emit(
                session, "control_signal", {"kind": "inject", "payload": signal.payload}
            )
            queued.ack._resolve(True, event.seq)
        elif signal.kind == "abort":
            event = self._emit(session, "control_signal", {"kind": "abort"})
            queued.ack._resolve(True, event.seq)
            return "abort"
        return None

    def _poll_signals(self, session: Session) -> str | None:
        """Drain queued signals; blocks while paused. Returns "abort" or None."""
        while True:
            try:
                if session.state == PAUSED:
                    queued = session.signals.get(timeout=self.signal_poll_interval)
                else:
                    queued = session.signals.get_nowait()
            except queue.Empty:
                if session.state == PAUSED:
                    continue
                return None
            if self._apply_signal(session, queued) == "abort":
                return "abort"

    # --- execution ---

    def _handoff_spec(self, handoff: Handoff) -> ToolSpec:
        return ToolSpec(
            name=handoff.name,
            description=f"Hand control of the session to the {handoff.target} agent.",
            parameters={"type": "object", "properties": {}},
        )

    def _build_request(self, session: Session) -> ChatRequest:
        agent = session.active
        specs = {spec.name: spec for spec in self.registry.specs(list(agent.tools))}
        for handoff in agent.handoffs:
            specs[handoff.name] = self._handoff_spec(handoff)
        ordered = tuple(specs[name] for name in sorted(specs))
        messages = (system(agent.instructions), *session.history[1:])
        return ChatRequest(
            model=agent.model,
            messages=messages,
            tool_specs=ordered,
            temperature=self.temperature,
        )

    def _complete(self, session: Session, request: ChatRequest) -> ChatResponse:
        delay = self.retry_base_delay
        for attempt in range(1, self.retry_attempts + 1):
            try:
                return session.backend.complete(request)
            except TransportError as exc:
                if attempt == self.retry_attempts:
                    raise GatewayError(f"transport failed after {attempt} attempts: {exc}") from exc
                self.clock.sleep(delay)
                delay *= 2
            except AuthError as exc:
                raise GatewayError(f"authentication failed: {exc}") from exc
        raise GatewayError("unreachable")  # pragma: no cover

    def _interaction_cost(self, session: Session, usage: Usage) -> tuple[float, bool]:
        model = session.active.model
        if self.prices is not None and model in self.prices:
            return cost(usage, model, self.prices), True
        return 0.0, False

    def process_interaction(self, session: Session) -> Interaction:
        """One completion plus in-order dispatch of every requested tool call."""
        if session.state == FINISHED:
            raise SessionFinished(session.id)
        if session.interactions_used >= session.budget.max_interactions:
            raise BudgetExceeded(
                f"budget of {session.budget.max_interactions} interactions exhausted"
            )
        index = session.interactions_used
        self._emit(session, "interaction_start", {"index": index, "agent": session.active_agent})
        request = self._build_request(session)
        self._emit(
            session,
            "model_request",
            {
                "model": request.model,
                "message_count": len(request.messages),
                "temperature": request.temperature,
            },
        )
        started = self.clock.monotonic()
        response = self._complete(session, request)
        wall_time = self.clock.monotonic() - started

        usage = response.usage if response.usage is not None else Usage()
        interaction_cost, priced = self._interaction_cost(session, usage)
        response_payload: dict[str, Any] = {
            "message": encode_message(response.message),
            "usage": {
                "prompt_tokens": usage.prompt_tokens,
                "completion_tokens": usage.completion_tokens,
            },
            "cost": interaction_cost,
        }
        if response.usage is None:
            response_payload["usage_missing"] = True
        if not priced:
            response_payload["unpriced"] = True
        self._emit(session, "model_response", response_payload)

        session.history.append(response.message)
        tool_results: list[tuple[str, ToolResult]] = []
        pending_handoff: Handoff | None = None
        edges = {h.name: h for h in session.active.handoffs}
        available = set(session.active.tools)
        for call in response.message.tool_calls:
            if call.name in edges:
                if pending_handoff is None:
                    pending_handoff = edges[call.name]
                    result = ToolResult(
                        status="ok",
                        stdout=f"control transferred to {pending_handoff.target}",
                        exit_code=0,
                    )
                else:
                    result = ToolResult(
                        status="error", stderr="handoff already performed in this interaction"
                    )
            elif call.name not in available:
                result = ToolResult(
                    status="error",
                    stderr=f"tool not available to agent {session.active_agent}: {call.name}",
                )
            else:
                result = self.registry.dispatch(call.name, call.arguments, self.policy)
            self._record_tool_exec(session, call.id, call.name, call.arguments, result)
            session.history.append(tool_reply(call.id, call.name, result.to_message_content()))
            tool_results.append((call.id, result))

        session.interactions_used += 1
        session.prompt_tokens += usage.prompt_tokens
        session.completion_tokens += usage.completion_tokens
        session.cost_total += interaction_cost
        interaction = Interaction(
            index=index,
            request_snapshot={"message_count": len(request.messages), "model": request.model},
            response=response.message,
            tool_results=tool_results,
            usage=usage,
            wall_time=wall_time,
            cost=interaction_cost,
        )
        if pending_handoff is not None:
            self.apply_handoff(session, pending_handoff.name)
            interaction.handoff = pending_handoff.name
        return interaction

    def _record_tool_exec(
        self,
        session: Session,
        call_id: str,
        name: str,
        arguments: dict[str, Any],
        result: ToolResult,
    ) -> None:
        stdout_digest = digest_text(result.stdout)
        stderr_digest = digest_text(result.stderr)
        event = self._emit(
            session,
            "tool_exec",
            {
                "call_id": call_id,
                "name": name,
                "arguments": arguments,
                "status": result.status,
                "exit_code": result.exit_code,
                "truncated": result.truncated,
                "duration": result.duration,
                "stdout": stdout_digest,
                "stderr": stderr_digest,
            },
        )
        if stdout_digest["bytes"] > DIGEST_HEAD_BYTES:
            self.sink.store_artifact(
                session.id, f"{event.seq:06d}_{name}.stdout", result.stdout.encode("utf-8")
            )
        if stderr_digest["bytes"] > DIGEST_HEAD_BYTES:
            self.sink.store_artifact(
                session.id, f"{event.seq:06d}_{name}.stderr", result.stderr.encode("utf-8")
            )

    def apply_handoff(self, session: Session, handoff_name: str) -> AgentDef:
        """Switch the active agent; history is kept, only the effective
        system prompt changes for subsequent completions."""
        edges = {h.name: h for h in session.active.handoffs}
        if handoff_name not in edges:
            raise UnknownHandoff(
                f"{handoff_name!r} is not a handoff of agent {session.active_agent}"
            )
        source = session.active_agent
        target = session.agents[edges[handoff_name].target]
        session.active_agent = target.name
        self._emit(
            session,
            "handoff",
            {"handoff": handoff_name, "source": source, "target": target.name},
        )
        return target

    def _wall_exceeded(self, session: Session) -> bool:
        limit = session.budget.wall_clock_limit
        if limit is None:
            return False
        return self.clock.monotonic() - session._start_mono >= limit

    def run_turn(self, session: Session) -> Turn:
        """Interactions until no further action, a handoff, exhaustion or abort."""
        if session.state == FINISHED:
            raise SessionFinished(session.id)
        interactions: list[Interaction] = []
        while True:
            if self._poll_signals(session) == "abort":
                termination = INTERRUPTED
                break
            if session.interactions_used >= session.budget.max_interactions or self._wall_exceeded(session):
                if not interactions:
                    raise BudgetExceeded(
                        f"budget of {session.budget.max_interactions} interactions exhausted"
                    )
                termination = BUDGET_EXHAUSTED
                break
            interaction = self.process_interaction(session)
            interactions.append(interaction)
            if interaction.handoff is not None:
                termination = HANDOFF
                break
            if not interaction.response.tool_calls:
                termination = NO_MORE_ACTIONS
                break
        turn = Turn(interactions=interactions, termination=termination)
        if interactions:
            session.turns_completed += 1
            self._emit(
                session,
                "turn_end",
                {"termination": termination, "interactions": len(interactions)},
            )
        return turn

    def run(
        self,
        session: Session,
        success_predicate: Callable[[Session], bool] | None = None,
    ) -> RunResult:
        """Turns until completion, exhaustion, abort or unrecoverable error."""
        if session.state == FINISHED:
            raise SessionFinished(session.id)
        turns: list[Turn] = []
        stop_reason: str | None = None
        error_message: str | None = None
        while stop_reason is None:
            try:
                turn = self.run_turn(session)
            except BudgetExceeded:
                stop_reason = BUDGET_EXHAUSTED
                break
            except GatewayError as exc:
                stop_reason = ERROR
                error_message = str(exc)
                break
            if turn.interactions:
                turns.append(turn)
            if turn.termination == NO_MORE_ACTIONS:
                stop_reason = COMPLETED
            elif turn.termination == BUDGET_EXHAUSTED:
                stop_reason = BUDGET_EXHAUSTED
            elif turn.termination == INTERRUPTED:
                stop_reason = INTERRUPTED_ABORT
        return self._finish(session, turns, stop_reason, error_message, success_predicate)

    def _finish(
        self,
        session: Session,
        turns: list[Turn],
        stop_reason: str,
        error_message: str | None,
        success_predicate: Callable[[Session], bool] | None,
    ) -> RunResult:
        session.state = FINISHED
        session.stop_reason = stop_reason
        session.elapsed = self.clock.monotonic() - session._start_mono
        if success_predicate is not None:
            session.solved = bool(success_predicate(session))
        payload: dict[str, Any] = {
            "stop_reason": stop_reason,
            "total_interactions": session.interactions_used,
            "total_turns": session.turns_completed,
            "prompt_tokens": session.prompt_tokens,
            "completion_tokens": session.completion_tokens,
            "total_cost": session.cost_total,
            "elapsed_seconds": session.elapsed,
        }
        if session.solved is not None:
            payload["solved"] = session.solved
        if error_message is not None:
            payload["error"] = error_message
        self._emit(session, "session_end", payload)
        return RunResult(
            turns=turns,
            stop_reason=stop_reason,
            total_interactions=session.interactions_used,
            total_cost=session.cost_total,
            elapsed=session.elapsed,
        )

    def session_summary(self, session: Session) -> SessionSummary:
        """Summary built from live counters (the fold over the trace must agree)."""
        return SessionSummary(
            total_interactions=session.interactions_used,
            total_turns=session.turns_completed,
            elapsed_seconds=session.elapsed,
            prompt_tokens=session.prompt_tokens,
            completion_tokens=session.completion_tokens,
            total_cost_dollars=session.cost_total,
            stop_reason=session.stop_reason,
            solved=session.solved,
        )
