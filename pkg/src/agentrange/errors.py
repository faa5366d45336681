"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AgentRangeError(Exception):
    """Base class for all package errors."""


# --- configuration / construction ---

class InvalidAgent(AgentRangeError):
    """Agent definition references tools or handoff targets that do not resolve."""


class InvalidBudget(AgentRangeError):
    """Budget violates its invariants (e.g. max_interactions < 1)."""


class InvalidSignal(AgentRangeError):
    """Control signal is malformed (e.g. inject without payload)."""


class SessionFinished(AgentRangeError):
    """Operation requires a live session but the session already finished."""


class BudgetExceeded(AgentRangeError):
    """Interaction requested past the session's interaction budget."""


class UnknownHandoff(AgentRangeError):
    """Handoff name is not a registered edge on the active agent."""


class AuthError(AgentRangeError):
    """A backend or remote host rejected the configured credential."""


# --- model gateway ---

class GatewayError(AgentRangeError):
    """Model backend failed after retries."""


class TransportError(GatewayError):
    """Transient transport failure; retryable."""


class MalformedResponse(GatewayError):
    """Backend reply does not match the wire format."""


class ScriptExhausted(GatewayError):
    """Scripted backend ran out of entries."""


class UnknownModel(AgentRangeError):
    """Model reference absent from the price table."""


class ParseError(AgentRangeError):
    """Structured document failed to parse; message carries the entry locator."""


# --- toolkit ---

class ToolError(AgentRangeError):
    """Tool executor failed in a way that is reported, never raised past dispatch."""


class DuplicateName(AgentRangeError):
    """Tool name already present in the registry."""


class ConnectError(ToolError):
    """Remote host unreachable."""


# --- patterns ---

class UnknownPattern(AgentRangeError):
    """No builtin pattern under that name."""


class DanglingReference(AgentRangeError):
    """Pattern document references an agent that is not defined."""


# --- trace ---

class OrderViolation(AgentRangeError):
    """Event sequence number is not strictly increasing for its session."""


class IncompleteStream(AgentRangeError):
    """Event stream has no session_end record."""


class CorruptRecord(AgentRangeError):
    """Trace log line failed to decode.

    Carries the byte offset of the bad record and the events decoded
    before it so callers can keep the readable prefix.
    """

    def __init__(self, message: str, byte_offset: int, events: list | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset
        self.events = events or []


# --- bench ---

class SetupFailure(AgentRangeError):
    """Challenge setup command failed; no session was started."""


class DivisionByZero(AgentRangeError):
    """Ratio denominator is zero."""


class EmptyInput(AgentRangeError):
    """Aggregation called with no records."""


class UnknownSession(AgentRangeError):
    """Session id not present in the registry."""
