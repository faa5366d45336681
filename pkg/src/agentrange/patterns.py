"""Declarative composition of agents and handoff edges into named patterns.

A pattern document is data, not code: a JSON object naming its agents,
the entry agent, and the handoff edges between them. Four configurations
ship builtin; their prompts are deliberately plain and replaceable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .engine import AgentDef, Handoff
from .errors import DanglingReference, ParseError, UnknownPattern

log = logging.getLogger(__name__)

BUILTIN_NAMES = ("one_tool_agent", "red_team", "blue_team", "bug_bounty")

DEFAULT_MODEL = "default"

_HOUSE_STYLE = (
    "Work step by step: inspect before acting, run one tool at a time, and "
    "explain findings briefly. When the objective is met, answer in plain "
    "text with your conclusion and stop calling tools."
)

RED_TEAM_PROMPT = (
    "You are a red team operator. Objective: Gain root access. "
    "Focus on penetration testing: network enumeration, service "
    "exploitation and privilege escalation. " + _HOUSE_STYLE
)
BLUE_TEAM_PROMPT = (
    "You are a blue team analyst. Objective: Protect systems. "
    "Focus on defense and monitoring: network monitoring, vulnerability "
    "assessment and incident response. " + _HOUSE_STYLE
)
BUG_BOUNTY_PROMPT = (
    "You are a bug bounty hunter. Objective: Find vulnerabilities. "
    "Focus on web application security: asset discovery, vulnerability "
    "assessment and responsible disclosure. " + _HOUSE_STYLE
)
ONE_TOOL_PROMPT = (
    "You are a security expert solving a CTF challenge with a single Linux "
    "command tool. " + _HOUSE_STYLE
)
DNS_PROMPT = (
    "You are a DNS reconnaissance specialist. Enumerate domains and mail "
    "security records, then hand control back. " + _HOUSE_STYLE
)
LOG_ANALYST_PROMPT = (
    "You are a log analyst. Inspect system logs for indicators of "
    "compromise, then hand control back. " + _HOUSE_STYLE
)
TRIAGE_PROMPT = (
    "You are a vulnerability triage specialist. Validate reported findings "
    "and rate their impact, then hand control back. " + _HOUSE_STYLE
)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    locator: str


@dataclass(frozen=True)
class Pattern:
    name: str
    agents: tuple[AgentDef, ...]
    entry: str

    @property
    def edges(self) -> tuple[tuple[str, str, str], ...]:
        """(source agent, handoff name, target agent) triples."""
        return tuple(
            (agent.name, handoff.name, handoff.target)
            for agent in self.agents
            for handoff in agent.handoffs
        )

    def agent(self, name: str) -> AgentDef:
        for candidate in self.agents:
            if candidate.name == name:
                return candidate
        raise KeyError(name)


def validate_pattern(pattern: Pattern) -> list[Diagnostic]:
    """One diagnostic per invariant violation; empty list means valid."""
    diagnostics: list[Diagnostic] = []
    names = [agent.name for agent in pattern.agents]
    seen: set[str] = set()
    for name in names:
        if name in seen:
            diagnostics.append(Diagnostic("error", f"duplicate agent name: {name}", f"agent {name}"))
        seen.add(name)
    if pattern.entry not in seen:
        diagnostics.append(
            Diagnostic("error", f"entry agent {pattern.entry!r} is not defined", "entry")
        )
    for source, handoff_name, target in pattern.edges:
        if target not in seen:
            diagnostics.append(
                Diagnostic(
                    "error",
                    f"handoff {handoff_name!r} targets unknown agent {target!r}",
                    f"agent {source}",
                )
            )
    # reachability from entry (cycles are legal swarm shapes)
    if pattern.entry in seen:
        reachable = {pattern.entry}
        frontier = [pattern.entry]
        adjacency: dict[str, list[str]] = {}
        for source, _, target in pattern.edges:
            adjacency.setdefault(source, []).append(target)
        while frontier:
            node = frontier.pop()
            for nxt in adjacency.get(node, []):
                if nxt in seen and nxt not in reachable:
                    reachable.add(nxt)
                    frontier.append(nxt)
        for name in names:
            if name not in reachable:
                diagnostics.append(
                    Diagnostic("warning", f"agent {name!r} unreachable from entry", f"agent {name}")
                )
    return diagnostics


def build_pattern(spec: dict[str, Any] | str | Path) -> Pattern:
    """Validated Pattern from a JSON document (path, text or parsed object)."""
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        try:
            text = path.read_text(encoding="utf-8") if path.exists() else str(spec)
            raw = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"pattern document: {exc}") from exc
    else:
        raw = spec
    if not isinstance(raw, dict):
        raise ParseError("pattern document must be an object")
    try:
        name = raw["name"]
        entry = raw["entry"]
        agents_raw = raw["agents"]
    except KeyError as exc:
        raise ParseError(f"pattern document missing key: {exc}") from exc
    agents = []
    for index, item in enumerate(agents_raw):
        try:
            agents.append(
                AgentDef(
                    name=item["name"],
                    instructions=item["instructions"],
                    model=item.get("model", DEFAULT_MODEL),
                    tools=tuple(item.get("tools", [])),
                    handoffs=tuple(
                        Handoff(name=h["name"], target=h["target"])
                        for h in item.get("handoffs", [])
                    ),
                )
            )
        except KeyError as exc:
            raise ParseError(f"agent {index}: missing key {exc}") from exc
    pattern = Pattern(name=name, agents=tuple(agents), entry=entry)
    diagnostics = validate_pattern(pattern)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise DanglingReference("; ".join(f"{d.locator}: {d.message}" for d in errors))
    for diagnostic in diagnostics:
        log.warning("pattern %s: %s (%s)", name, diagnostic.message, diagnostic.locator)
    return pattern


def builtin_pattern(name: str, model: str = DEFAULT_MODEL) -> Pattern:
    """One of the shipped configurations, parameterized by model reference."""
    if name == "one_tool_agent":
        return Pattern(
            name="one_tool_agent",
            entry="one_tool_agent",
            agents=(
                AgentDef(
                    name="one_tool_agent",
                    instructions=ONE_TOOL_PROMPT,
                    model=model,
                    tools=("generic_linux_command",),
                ),
            ),
        )
    if name == "red_team":
        return Pattern(
            name="red_team",
            entry="red_team",
            agents=(
                AgentDef(
                    name="red_team",
                    instructions=RED_TEAM_PROMPT,
                    model=model,
                    tools=("generic_linux_command", "ssh_command", "execute_code"),
                    handoffs=(Handoff(name="transfer_to_dns_agent", target="dns_agent"),),
                ),
                AgentDef(
                    name="dns_agent",
                    instructions=DNS_PROMPT,
                    model=model,
                    tools=("generic_linux_command",),
                    handoffs=(Handoff(name="transfer_to_red_team", target="red_team"),),
                ),
            ),
        )
    if name == "blue_team":
        return Pattern(
            name="blue_team",
            entry="blue_team",
            agents=(
                AgentDef(
                    name="blue_team",
                    instructions=BLUE_TEAM_PROMPT,
                    model=model,
                    tools=("generic_linux_command", "ssh_command", "execute_code"),
                    handoffs=(Handoff(name="transfer_to_log_analyst", target="log_analyst"),),
                ),
                AgentDef(
                    name="log_analyst",
                    instructions=LOG_ANALYST_PROMPT,
                    model=model,
                    tools=("generic_linux_command",),
                    handoffs=(Handoff(name="transfer_to_blue_team", target="blue_team"),),
                ),
            ),
        )
    if name == "bug_bounty":
        return Pattern(
            name="bug_bounty",
            entry="bug_bounty",
            agents=(
                AgentDef(
                    name="bug_bounty",
                    instructions=BUG_BOUNTY_PROMPT,
                    model=model,
                    tools=(
                        "generic_linux_command",
                        "execute_code",
                        "shodan_search",
                        "shodan_host_info",
                        "google_search",
                    ),
                    handoffs=(Handoff(name="transfer_to_triage", target="triage"),),
                ),
                AgentDef(
                    name="triage",
                    instructions=TRIAGE_PROMPT,
                    model=model,
                    tools=("google_search",),
                    handoffs=(Handoff(name="transfer_to_bug_bounty", target="bug_bounty"),),
                ),
            ),
        )
    raise UnknownPattern(name)
