"""Remote command execution over SSH via the OpenSSH client.

Credentials are resolved from configuration references only; the model never
supplies user names, key paths or passwords directly.
"""

from __future__ import annotations

import json
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import AuthError, ConnectError
from .toolkit import ExecPolicy, ToolResult, truncate_streams

DEFAULT_CONNECT_TIMEOUT_S = 5.0

_AUTH_PATTERNS = ("permission denied", "authentication failed", "too many authentication failures")
_CONNECT_PATTERNS = (
    "connection refused",
    "connection timed out",
    "could not resolve",
    "no route to host",
    "network is unreachable",
    "connection closed by remote host",
    "operation timed out",
)


@dataclass(frozen=True)
class SshCredential:
    user: str | None = None
    identity_file: str | None = None
    port: int | None = None


class CredentialStore:
    """Named SSH credentials loaded from a configuration file."""

    def __init__(self, entries: dict[str, SshCredential] | None = None):
        self._entries = dict(entries or {})

    def resolve(self, reference: str) -> SshCredential:
        try:
            return self._entries[reference]
        except KeyError:
            raise AuthError(f"unknown credential reference: {reference}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "CredentialStore":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = {
            name: SshCredential(
                user=value.get("user"),
                identity_file=value.get("identity_file"),
                port=value.get("port"),
            )
            for name, value in raw.items()
        }
        return cls(entries)


def _classify_failure(stderr: str) -> type[Exception] | None:
    lowered = stderr.lower()
    for pattern in _AUTH_PATTERNS:
        if pattern in lowered:
            return AuthError
    for pattern in _CONNECT_PATTERNS:
        if pattern in lowered:
            return ConnectError
    return None


def build_argv(
    host: str,
    command: str,
    credential: SshCredential | None,
    connect_timeout: float,
) -> list[str]:
    argv = [
        "ssh",
        "-o", "BatchMode=yes",
        "-o", "StrictHostKeyChecking=accept-new",
        "-o", f"ConnectTimeout={max(1, int(connect_timeout))}",
    ]
    if credential is not None:
        if credential.identity_file:
            argv += ["-i", credential.identity_file, "-o", "IdentitiesOnly=yes"]
        if credential.port:
            argv += ["-p", str(credential.port)]
        if credential.user:
            argv += ["-l", credential.user]
    argv += [host, command]
    return argv


def ssh_command(
    host: str,
    credential: str | SshCredential | None,
    command: str,
    policy: ExecPolicy | None = None,
    *,
    store: CredentialStore | None = None,
    connect_timeout: float = DEFAULT_CONNECT_TIMEOUT_S,
) -> ToolResult:
    """Run `command` on `host`; raises AuthError / ConnectError on failures.

    The remote output follows the same capture and truncation contract as
    local execution. The client program itself must be permitted by the
    policy, which the benign default set deliberately is not.
    """
    policy = policy or ExecPolicy()
    if not host:
        raise ConnectError("empty host")
    if not policy.permits("ssh"):
        return ToolResult(status="policy_violation", stderr="program not permitted by policy: ssh")
    if isinstance(credential, str):
        credential = (store or CredentialStore()).resolve(credential)
    argv = build_argv(host, command, credential, connect_timeout)
    start = time.monotonic()
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=policy.timeout)
    except subprocess.TimeoutExpired as exc:
        duration = time.monotonic() - start
        out, err, trunc = truncate_streams(exc.stdout or b"", exc.stderr or b"", policy.max_output_bytes)
        return ToolResult(status="timeout", stdout=out, stderr=err, truncated=trunc, duration=duration)
    duration = time.monotonic() - start
    out, err, trunc = truncate_streams(proc.stdout, proc.stderr, policy.max_output_bytes)
    if proc.returncode == 255:  # OpenSSH reserves 255 for client/connection errors
        failure = _classify_failure(err)
        if failure is not None:
            raise failure(err.strip() or f"ssh failed connecting to {host}")
    status = "ok" if proc.returncode == 0 else "error"
    return ToolResult(
        status=status,
        stdout=out,
        stderr=err,
        exit_code=proc.returncode,
        truncated=trunc,
        duration=duration,
    )
