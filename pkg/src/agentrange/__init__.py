"""Stateless ReACT security agents with tools, handoffs, patterns, budgets,
human-in-the-loop control and tracing, plus a CTF-style benchmark harness."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .engine import AgentDef, Budget, ControlSignal, Engine, Handoff, Session
from .gateway import HttpChatClient, PriceTable, ScriptedBackend, Usage, cost, load_script
from .patterns import Pattern, build_pattern, builtin_pattern, validate_pattern
from .toolkit import ExecPolicy, ToolRegistry, ToolResult, ToolSpec, default_registry

__all__ = [
    "AgentDef",
    "Budget",
    "ControlSignal",
    "Engine",
    "ExecPolicy",
    "Handoff",
    "HttpChatClient",
    "Pattern",
    "PriceTable",
    "ScriptedBackend",
    "Session",
    "ToolRegistry",
    "ToolResult",
    "ToolSpec",
    "Usage",
    "build_pattern",
    "builtin_pattern",
    "bundled_challenges_dir",
    "cost",
    "default_registry",
    "load_script",
    "validate_pattern",
]

__version__ = "0.1.0"


def bundled_challenges_dir() -> Path:
    """Directory holding the shipped toy challenge manifest and scripts."""
    return Path(str(resources.files("agentrange") / "data" / "challenges"))
