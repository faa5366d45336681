"""Tool registry and built-in tools: sandboxed command execution, code
execution, and offline search stubs.

Every tool runs under an :class:`ExecPolicy` envelope: program allow/deny
list, wall-clock timeout, exact output cap, and a working directory.
Subprocesses are spawned from argument vectors; no intermediate shell.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import DuplicateName, ToolError

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MAX_OUTPUT_BYTES = 64 * 1024

# Read-only command set used by the default policy. None of these write
# files, so no execution can escape the working directory on disk.
BENIGN_PROGRAMS = (
    "base64", "cat", "echo", "false", "file", "head", "ls",
    "printf", "pwd", "sha256sum", "sleep", "tail", "tar", "true", "wc",
)


@dataclass(frozen=True)
class ToolSpec:
    """Function-style tool description advertised to the model."""

    name: str
    description: str
    parameters: dict[str, Any]

    _ALLOWED_TYPES = ("string", "number", "boolean", "object")

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("tool name must be nonempty")
        props = self.parameters.get("properties", {})
        for pname, schema in props.items():
            ptype = schema.get("type")
            if ptype not in self._ALLOWED_TYPES:
                raise ValueError(f"{self.name}.{pname}: unsupported schema type {ptype!r}")


@dataclass(frozen=True)
class ExecPolicy:
    """Safety envelope for tool execution."""

    mode: str = "allowlist"  # or "denylist"
    entries: tuple[str, ...] = BENIGN_PROGRAMS
    timeout: float = DEFAULT_TIMEOUT_S
    max_output_bytes: int = DEFAULT_MAX_OUTPUT_BYTES
    working_dir: str = "."

    def __post_init__(self) -> None:
        if self.mode not in ("allowlist", "denylist"):
            raise ValueError(f"unknown policy mode: {self.mode!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_output_bytes <= 0:
            raise ValueError("max_output_bytes must be > 0")

    def permits(self, program: str) -> bool:
        name = Path(program).name
        if self.mode == "allowlist":
            return name in self.entries
        return name not in self.entries


@dataclass(frozen=True)
class ToolResult:
    """Outcome of one tool call, serializable without information loss."""

    status: str  # ok | error | timeout | policy_violation
    stdout: str = ""
    stderr: str = ""
    exit_code: int | None = None
    truncated: bool = False
    duration: float = 0.0

    def to_message_content(self) -> str:
        return json.dumps(
            {
                "status": self.status,
                "exit_code": self.exit_code,
                "stdout": self.stdout,
                "stderr": self.stderr,
                "truncated": self.truncated,
                "duration": round(self.duration, 6),
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_message_content(cls, content: str) -> "ToolResult":
        raw = json.loads(content)
        return cls(
            status=raw["status"],
            stdout=raw["stdout"],
            stderr=raw["stderr"],
            exit_code=raw["exit_code"],
            truncated=raw["truncated"],
            duration=raw["duration"],
        )


Executor = Callable[[dict[str, Any], ExecPolicy], ToolResult]


class ToolRegistry:
    """Name -> (spec, executor) mapping with deterministic listing order."""

    def __init__(self) -> None:
        self._tools: dict[str, tuple[ToolSpec, Executor]] = {}

    def register(self, spec: ToolSpec, executor: Executor) -> None:
        if spec.name in self._tools:
            raise DuplicateName(f"tool already registered: {spec.name}")
        self._tools[spec.name] = (spec, executor)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def names(self) -> list[str]:
        return sorted(self._tools)

    def schema_of(self, name: str) -> ToolSpec:
        return self._tools[name][0]

    def specs(self, names: list[str] | None = None) -> list[ToolSpec]:
        """Specs for the given tools (all when omitted), sorted by name."""
        selected = self.names() if names is None else sorted(names)
        return [self._tools[n][0] for n in selected]

    def dispatch(self, name: str, arguments: dict[str, Any], policy: ExecPolicy) -> ToolResult:
        """Run a tool; failures come back as results, never exceptions."""
        entry = self._tools.get(name)
        if entry is None:
            return ToolResult(status="error", stderr=f"unknown tool: {name}")
        _, executor = entry
        try:
            return executor(arguments, policy)
        except ToolError as exc:
            return ToolResult(status="error", stderr=str(exc))
        except Exception as exc:  # defensive: a tool bug must not kill the session
            log.exception("tool %s crashed", name)
            return ToolResult(status="error", stderr=f"{type(exc).__name__}: {exc}")


def truncate_streams(stdout: bytes, stderr: bytes, cap: int) -> tuple[str, str, bool]:
    """Cap stdout+stderr at exactly `cap` bytes total; stdout keeps priority."""
    total = len(stdout) + len(stderr)
    truncated = total > cap
    if truncated:
        keep_out = min(len(stdout), cap)
        stdout = stdout[:keep_out]
        stderr = stderr[: cap - keep_out]
    return (
        stdout.decode("utf-8", errors="replace"),
        stderr.decode("utf-8", errors="replace"),
        truncated,
    )


def run_program(argv: list[str], policy: ExecPolicy, timeout: float | None = None) -> ToolResult:
    """Execute an argument vector under the policy envelope."""
    if not argv or not argv[0]:
        return ToolResult(status="error", stderr="empty command")
    if not policy.permits(argv[0]):
        return ToolResult(
            status="policy_violation",
            stderr=f"program not permitted by policy: {Path(argv[0]).name}",
        )
    deadline = timeout if timeout is not None else policy.timeout
    start = time.monotonic()
    try:
        proc = subprocess.run(
            argv,
            cwd=policy.working_dir,
            capture_output=True,
            timeout=deadline,
        )
    except subprocess.TimeoutExpired as exc:
        duration = time.monotonic() - start
        out, err, trunc = truncate_streams(exc.stdout or b"", exc.stderr or b"", policy.max_output_bytes)
        return ToolResult(status="timeout", stdout=out, stderr=err, truncated=trunc, duration=duration)
    except FileNotFoundError:
        duration = time.monotonic() - start
        return ToolResult(status="error", stderr=f"program not found: {argv[0]}", duration=duration)
    duration = time.monotonic() - start
    out, err, trunc = truncate_streams(proc.stdout, proc.stderr, policy.max_output_bytes)
    status = "ok" if proc.returncode == 0 else "error"
    return ToolResult(
        status=status,
        stdout=out,
        stderr=err,
        exit_code=proc.returncode,
        truncated=trunc,
        duration=duration,
    )


# --- built-in tools ---

def generic_linux_command(command: str, args: str = "", policy: ExecPolicy | None = None) -> ToolResult:
    """Run one program with shell-style-quoted args, without a shell."""
    policy = policy or ExecPolicy()
    if not command:
        return ToolResult(status="error", stderr="empty command")
    try:
        argv = [command] + shlex.split(args or "")
    except ValueError as exc:
        return ToolResult(status="error", stderr=f"unparsable arguments: {exc}")
    return run_program(argv, policy)


def execute_code(
    source: str,
    timeout: float | None = None,
    policy: ExecPolicy | None = None,
    interpreter: str = "python3",
) -> ToolResult:
    """Write source to a temp file inside working_dir and run it."""
    policy = policy or ExecPolicy()
    if not source:
        return ToolResult(status="error", stderr="empty source")
    if not policy.permits(interpreter):
        return ToolResult(
            status="policy_violation",
            stderr=f"interpreter not permitted by policy: {interpreter}",
        )
    workdir = Path(policy.working_dir)
    with tempfile.NamedTemporaryFile(
        "w", suffix=".src", dir=workdir, delete=False, encoding="utf-8"
    ) as handle:
        handle.write(source)
        script_path = handle.name
    try:
        return run_program([interpreter, script_path], policy, timeout=timeout)
    finally:
        Path(script_path).unlink(missing_ok=True)


class SearchFixture:
    """Offline corpus of query -> canned results for the search-style tools."""

    def __init__(self, corpus: dict[str, list[dict[str, Any]]] | None = None):
        self._corpus = dict(corpus or {})

    def lookup(self, query: str) -> list[dict[str, Any]]:
        return list(self._corpus.get(query, []))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self._corpus, ensure_ascii=False, sort_keys=True, indent=2),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "SearchFixture":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))


def search_stub(query: str, fixture: SearchFixture) -> ToolResult:
    """Deterministic search results from a fixture corpus; unknown -> empty."""
    results = fixture.lookup(query)
    return ToolResult(status="ok", stdout=json.dumps(results, ensure_ascii=False), exit_code=0)


# --- registry wiring ---

_STR = {"type": "string"}


def _command_spec() -> ToolSpec:
    return ToolSpec(
        name="generic_linux_command",
        description="Execute a single Linux program. Provide the program name and its arguments.",
        parameters={
            "type": "object",
            "properties": {
                "command": {"type": "string", "description": "program to run, e.g. ls"},
                "args": {"type": "string", "description": "arguments, shell-style quoting"},
            },
            "required": ["command"],
        },
    )


def _ssh_spec() -> ToolSpec:
    return ToolSpec(
        name="ssh_command",
        description="Run a command on a remote host over SSH using a configured credential.",
        parameters={
            "type": "object",
            "properties": {
                "host": _STR,
                "credential": {"type": "string", "description": "credential reference name"},
                "command": _STR,
            },
            "required": ["host", "command"],
        },
    )


def _code_spec() -> ToolSpec:
    return ToolSpec(
        name="execute_code",
        description="Run a short script with the configured interpreter and capture its output.",
        parameters={
            "type": "object",
            "properties": {
                "source": _STR,
                "timeout": {"type": "number"},
            },
            "required": ["source"],
        },
    )


def _search_spec(name: str, description: str) -> ToolSpec:
    return ToolSpec(
        name=name,
        description=description,
        parameters={
            "type": "object",
            "properties": {"query": _STR},
            "required": ["query"],
        },
    )


def default_registry(
    fixture: SearchFixture | None = None,
    ssh_runner: Callable[..., ToolResult] | None = None,
    interpreter: str = "python3",
) -> ToolRegistry:
    """Registry with every built-in tool wired to its executor."""
    from .ssh import ssh_command  # local import: ssh module depends on this one

    fixture = fixture or SearchFixture()
    runner = ssh_runner or ssh_command
    registry = ToolRegistry()

    def exec_command(arguments: dict[str, Any], policy: ExecPolicy) -> ToolResult:
        return generic_linux_command(
            str(arguments.get("command", "")), str(arguments.get("args", "") or ""), policy
        )

    def exec_code(arguments: dict[str, Any], policy: ExecPolicy) -> ToolResult:
        timeout = arguments.get("timeout")
        return execute_code(
            str(arguments.get("source", "")),
            timeout=float(timeout) if timeout is not None else None,
            policy=policy,
            interpreter=interpreter,
        )

    def exec_ssh(arguments: dict[str, Any], policy: ExecPolicy) -> ToolResult:
        return runner(
            host=str(arguments.get("host", "")),
            credential=arguments.get("credential"),
            command=str(arguments.get("command", "")),
            policy=policy,
        )

    def exec_search(arguments: dict[str, Any], policy: ExecPolicy) -> ToolResult:
        return search_stub(str(arguments.get("query", "")), fixture)

    registry.register(_command_spec(), exec_command)
    registry.register(_code_spec(), exec_code)
    registry.register(_ssh_spec(), exec_ssh)
    registry.register(_search_spec("google_search", "Search the web corpus for a query."), exec_search)
    registry.register(_search_spec("shodan_search", "Search the internet-device corpus for a query."), exec_search)
    registry.register(
        _search_spec("shodan_host_info", "Look up recorded details for a host address."), exec_search
    )
    return registry
