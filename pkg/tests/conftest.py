from __future__ import annotations

import pytest

from agentrange.clock import FixedClock
from agentrange.engine import Budget, Engine
from agentrange.gateway import PriceTable, ScriptedBackend
from agentrange.patterns import builtin_pattern
from agentrange.toolkit import ExecPolicy
from agentrange.trace import MemorySink

_acceptance_results: list[tuple[str, str]] = []


@pytest.fixture
def memory_sink():
    return MemorySink()


@pytest.fixture
def prices():
    return PriceTable({"default": (3.0, 15.0)})


@pytest.fixture
def make_engine(tmp_path, prices):
    """Engine factory over a scripted backend with a benign policy rooted in tmp_path."""

    def build(script, *, sink=None, fixed_clock=False, policy_entries=None, **kwargs):
        policy = ExecPolicy(
            entries=policy_entries or ExecPolicy().entries,
            working_dir=str(tmp_path),
        )
        return Engine(
            backend=ScriptedBackend.from_source(script),
            sink=sink if sink is not None else MemorySink(),
            prices=prices,
            policy=policy,
            clock=FixedClock() if fixed_clock else None,
            **kwargs,
        )

    return build


@pytest.fixture
def one_tool():
    return builtin_pattern("one_tool_agent")


@pytest.fixture
def small_budget():
    return Budget(max_interactions=10)


def record_criterion(name: str, passed: bool) -> None:
    _acceptance_results.append((name, "PASS" if passed else "FAIL"))


def pytest_runtest_logreport(report):
    # one line per acceptance criterion in the terminal summary
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance_results.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results:
        terminalreporter.write_line(f"[{outcome}] {name}")
