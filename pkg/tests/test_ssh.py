from __future__ import annotations

import shutil
import socket
import subprocess
import time

import pytest

from agentrange.errors import AuthError, ConnectError
from agentrange.ssh import (
    CredentialStore,
    SshCredential,
    _classify_failure,
    build_argv,
    ssh_command,
)
from agentrange.toolkit import ExecPolicy

SSH_POLICY = ExecPolicy(entries=("ssh",), timeout=15)

needs_ssh_client = pytest.mark.skipif(shutil.which("ssh") is None, reason="no ssh client")
needs_sshd = pytest.mark.skipif(shutil.which("sshd") is None, reason="no sshd on this host")


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class TestClassification:
    def test_auth_patterns(self):
        assert _classify_failure("user@host: Permission denied (publickey).") is AuthError
        assert _classify_failure("Authentication failed.") is AuthError

    def test_connect_patterns(self):
        assert _classify_failure("connect to host x port 22: Connection refused") is ConnectError
        assert _classify_failure("ssh: Could not resolve hostname nowhere") is ConnectError
        assert _classify_failure("connect to host x port 22: Connection timed out") is ConnectError

    def test_unknown_stderr_not_classified(self):
        assert _classify_failure("something odd happened") is None


class TestArgv:
    def test_credential_fields_mapped(self):
        credential = SshCredential(user="tester", identity_file="/k", port=2200)
        argv = build_argv("target", "whoami", credential, 5)
        assert argv[0] == "ssh"
        assert "-i" in argv and "/k" in argv
        assert "-p" in argv and "2200" in argv
        assert "-l" in argv and "tester" in argv
        assert argv[-2:] == ["target", "whoami"]

    def test_batch_mode_always_on(self):
        argv = build_argv("h", "c", None, 5)
        assert "BatchMode=yes" in argv


class TestCredentialStore:
    def test_resolve_known(self):
        store = CredentialStore({"lab": SshCredential(user="u")})
        assert store.resolve("lab").user == "u"

    def test_unknown_reference_is_auth_error(self):
        with pytest.raises(AuthError):
            CredentialStore().resolve("ghost")

    def test_from_file(self, tmp_path):
        path = tmp_path / "creds.json"
        path.write_text('{"lab": {"user": "u", "identity_file": "/id", "port": 2201}}')
        credential = CredentialStore.from_file(path).resolve("lab")
        assert (credential.user, credential.identity_file, credential.port) == ("u", "/id", 2201)


class TestPolicy:
    def test_default_policy_blocks_ssh_client(self):
        result = ssh_command("127.0.0.1", None, "true", ExecPolicy())
        assert result.status == "policy_violation"


@needs_ssh_client
class TestUnreachable:
    def test_closed_port_raises_connect_error_quickly(self):
        port = free_port()  # bound then released: nothing listens there
        credential = SshCredential(port=port)
        start = time.monotonic()
        with pytest.raises(ConnectError):
            ssh_command("127.0.0.1", credential, "whoami", SSH_POLICY, connect_timeout=3)
        assert time.monotonic() - start < 10


@needs_sshd
class TestLoopbackServer:
    """Runs a throwaway sshd on a high port; auto-skips where unavailable."""

    @pytest.fixture
    def server(self, tmp_path):
        import getpass

        port = free_port()
        host_key = tmp_path / "host_key"
        user_key = tmp_path / "user_key"
        for key in (host_key, user_key):
            subprocess.run(
                ["ssh-keygen", "-q", "-t", "ed25519", "-N", "", "-f", str(key)], check=True
            )
        authorized = tmp_path / "authorized_keys"
        authorized.write_bytes((user_key.with_suffix(".pub")).read_bytes())
        authorized.chmod(0o600)
        config = tmp_path / "sshd_config"
        config.write_text(
            f"Port {port}\nListenAddress 127.0.0.1\nHostKey {host_key}\n"
            f"AuthorizedKeysFile {authorized}\nPasswordAuthentication no\n"
            "StrictModes no\nPidFile none\n"
        )
        proc = subprocess.Popen([shutil.which("sshd"), "-D", "-f", str(config)])
        for _ in range(50):
            try:
                socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
                break
            except OSError:
                time.sleep(0.1)
        yield SshCredential(user=getpass.getuser(), identity_file=str(user_key), port=port)
        proc.terminate()
        proc.wait()

    def test_whoami_over_loopback(self, server):
        import getpass

        result = ssh_command("127.0.0.1", server, "whoami", SSH_POLICY)
        assert result.status == "ok"
        assert result.stdout.strip() == getpass.getuser()

    def test_wrong_credential_is_auth_error(self, server, tmp_path):
        bad_key = tmp_path / "bad_key"
        subprocess.run(["ssh-keygen", "-q", "-t", "ed25519", "-N", "", "-f", str(bad_key)],
                       check=True)
        bad = SshCredential(user=server.user, identity_file=str(bad_key), port=server.port)
        with pytest.raises(AuthError):
            ssh_command("127.0.0.1", bad, "whoami", SSH_POLICY)
