"""Operator entry point: interactive REPL with HITL, batch benchmark runner,
trace replay, and the control-API server.

Exit statuses: 0 success, 1 usage/config, 2 gateway, 3 setup.
"""

from __future__ import annotations

import os
import sys
import threading
from pathlib import Path

import click

from . import bundled_challenges_dir
from .bench import (
    BenchHarness,
    aggregate,
    load_manifest,
    pass_at_1,
    write_records,
)
from .clock import Clock, FixedClock
from .engine import Budget, ControlSignal, Engine, Session
from .errors import (
    AgentRangeError,
    CorruptRecord,
    GatewayError,
    IncompleteStream,
    ParseError,
    SetupFailure,
)
from .gateway import ENV_MODEL, HttpChatClient, PriceTable, ScriptedBackend
from .patterns import BUILTIN_NAMES, build_pattern, builtin_pattern
from .report import render_model_grid, render_report
from .trace import JsonlSink, MemorySink, TeeSink, replay, summarize
from .transcript import render_transcript

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GATEWAY = 2
EXIT_SETUP = 3

click.UsageError.exit_code = EXIT_USAGE


def _resolve_pattern(name_or_path: str, model: str):
    if name_or_path in BUILTIN_NAMES:
        return builtin_pattern(name_or_path, model=model)
    return build_pattern(name_or_path)


def _parse_backend(value: str) -> tuple[str, str | None]:
    if value == "live":
        return "live", None
    if value.startswith("scripted:"):
        path = value.split(":", 1)[1]
        if not path:
            raise click.UsageError("scripted backend requires a path: scripted:<path>")
        return "scripted", path
    raise click.UsageError(f"unknown backend {value!r}; use live or scripted:<path>")


def _load_prices(path: str | None) -> PriceTable | None:
    return PriceTable.from_file(path) if path else None


@click.group()
def main() -> None:
    """Run, steer and benchmark security agent sessions."""


@main.command()
@click.option("--task", required=True, help="objective handed to the agent")
@click.option("--model", default=lambda: os.environ.get(ENV_MODEL, "default"), show_default="env or 'default'")
@click.option("--pattern", "pattern_name", default="one_tool_agent", show_default=True,
              help="builtin pattern name or pattern file path")
@click.option("--budget", default=100, show_default=True, type=int)
@click.option("--backend", default="live", show_default=True, help="live or scripted:<path>")
@click.option("--trace-dir", default=None, type=click.Path(), help="write trace files here")
@click.option("--no-hitl", is_flag=True, help="disable the Ctrl+C control prompt")
@click.option("--prices", default=None, type=click.Path(exists=True), help="price table JSON")
def repl(task, model, pattern_name, budget, backend, trace_dir, no_hitl, prices) -> None:
    """Run one session; Ctrl+C pauses it and opens the control prompt."""
    try:
        pattern = _resolve_pattern(pattern_name, model)
        kind, script_path = _parse_backend(backend)
        chat_backend = (
            HttpChatClient.from_env() if kind == "live" else ScriptedBackend.from_source(script_path)
        )
        memory = MemorySink()
        sink = TeeSink(memory, JsonlSink(trace_dir)) if trace_dir else memory
        engine = Engine(backend=chat_backend, sink=sink, prices=_load_prices(prices))
        session = engine.create_session(pattern, task, Budget(max_interactions=budget))
    except (AgentRangeError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_USAGE)

    outcome = _drive_session(engine, session, hitl=not no_hitl)
    click.echo(render_transcript(memory.events(session.id)), nl=False)
    if isinstance(outcome, GatewayError):
        click.echo(f"gateway error: {outcome}", err=True)
        sys.exit(EXIT_GATEWAY)
    summary = engine.session_summary(session)
    click.echo(
        f"stop_reason={summary.stop_reason} interactions={summary.total_interactions} "
        f"turns={summary.total_turns} cost=${summary.total_cost_dollars:.6f}"
    )
    sys.exit(EXIT_GATEWAY if summary.stop_reason == "error" else EXIT_OK)


def _drive_session(engine: Engine, session: Session, hitl: bool):
    """Run the session, servicing keyboard interrupts as control signals.

    Returns the GatewayError when the run failed, else None.
    """
    holder: dict = {}

    def work() -> None:
        try:
            holder["result"] = engine.run(session)
        except GatewayError as exc:
            holder["error"] = exc

    worker = threading.Thread(target=work, daemon=True)
    worker.start()
    if not hitl:
        worker.join()
        return holder.get("error")
    while worker.is_alive():
        try:
            worker.join(timeout=0.2)
        except KeyboardInterrupt:
            engine.submit_signal(session, ControlSignal(kind="pause"))
            if _hitl_prompt(engine, session) == "abort":
                engine.submit_signal(session, ControlSignal(kind="abort"))
        # a second interrupt lands inside _hitl_prompt and aborts there
    return holder.get("error")


def _hitl_prompt(engine: Engine, session: Session) -> str | None:
    """Interactive pause menu; returns "abort" when the session must stop."""
    click.echo("\npaused. commands: inject <text> | resume | abort", err=True)
    while True:
        try:
            line = click.prompt("hitl", prompt_suffix="> ", err=True)
        except (KeyboardInterrupt, EOFError, click.Abort):
            return "abort"
        if line.startswith("inject "):
            text = line[len("inject "):].strip()
            if not text:
                click.echo("inject needs text", err=True)
                continue
            engine.submit_signal(session, ControlSignal(kind="inject", payload=text))
            click.echo("queued; resume to continue", err=True)
        elif line.strip() == "resume":
            engine.submit_signal(session, ControlSignal(kind="resume"))
            return None
        elif line.strip() == "abort":
            return "abort"
        else:
            click.echo(f"unknown command: {line}", err=True)


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              help="manifest JSON path, or 'bundled' for the shipped toy set")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--model", default=lambda: os.environ.get(ENV_MODEL, "default"), show_default="env or 'default'")
@click.option("--pattern", "pattern_name", default="one_tool_agent", show_default=True)
@click.option("--budget", default=100, show_default=True, type=int)
@click.option("--backend", default=None, help="live or scripted:<dir with <id>.json scripts>")
@click.option("--parallel", default=1, show_default=True, type=int)
@click.option("--report", "report_format", default="md", type=click.Choice(["md", "csv"]), show_default=True)
@click.option("--prices", default=None, type=click.Path(exists=True))
@click.option("--trace-dir", default=None, type=click.Path())
@click.option("--fixed-clock", is_flag=True,
              help="deterministic clock and ids: byte-stable outputs for scripted runs")
def bench(manifest_path, out_dir, model, pattern_name, budget, backend, parallel,
          report_format, prices, trace_dir, fixed_clock) -> None:
    """Run every challenge in a manifest and write records, metrics, reports."""
    if manifest_path == "bundled":
        manifest_path = str(bundled_challenges_dir() / "manifest.json")
        if backend is None:
            backend = f"scripted:{bundled_challenges_dir() / 'scripts'}"
    if backend is None:
        backend = "live"
    try:
        manifests = load_manifest(manifest_path)
        kind, script_dir = _parse_backend(backend)
        pattern = _resolve_pattern(pattern_name, model)
        price_table = _load_prices(prices)
    except (AgentRangeError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_USAGE)

    if kind == "scripted":
        scripts = Path(script_dir)
        missing = [m.id for m in manifests if not (scripts / f"{m.id}.json").exists()]
        if missing:
            click.echo(f"config error: no script for challenges: {', '.join(missing)}", err=True)
            sys.exit(EXIT_USAGE)

        def backend_factory(manifest):
            return ScriptedBackend.from_source(scripts / f"{manifest.id}.json")
    else:
        client = HttpChatClient.from_env()

        def backend_factory(manifest):
            return client

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sink = JsonlSink(trace_dir) if trace_dir else JsonlSink(out / "traces")
    counter = iter(range(1, 10**9))
    harness = BenchHarness(
        backend_factory=backend_factory,
        work_root=out / "work",
        sink=sink,
        prices=price_table,
        model=model,
        clock_factory=FixedClock if fixed_clock else Clock,
        id_source=(lambda: f"bench-{next(counter):06d}") if fixed_clock else None,
    )
    try:
        records = harness.run_all(pattern, manifests, Budget(max_interactions=budget), parallel=parallel)
    except SetupFailure as exc:
        click.echo(f"setup failure: {exc}", err=True)
        sys.exit(EXIT_SETUP)
    except GatewayError as exc:
        click.echo(f"gateway error: {exc}", err=True)
        sys.exit(EXIT_GATEWAY)

    write_records(records, out / "records.jsonl")
    rows = aggregate(records, "category")
    (out / "metrics.csv").write_text(render_report(rows, "csv"), encoding="utf-8")
    report_name = "report.md" if report_format == "md" else "report.csv"
    fmt = "markdown" if report_format == "md" else "csv"
    (out / report_name).write_text(render_report(rows, fmt), encoding="utf-8")
    (out / "model_grid.md").write_text(render_model_grid(records), encoding="utf-8")
    click.echo(
        f"challenges={len(records)} solved={sum(1 for r in records if r.solved)} "
        f"pass@1={pass_at_1(records):.2f} -> {out}"
    )
    sys.exit(EXIT_OK)


@main.command("replay")
@click.argument("trace_file", type=click.Path(exists=True))
def replay_cmd(trace_file) -> None:
    """Print a session transcript and summary from its trace file alone."""
    try:
        events = replay(trace_file)
        partial = False
    except CorruptRecord as exc:
        events = exc.events
        partial = True
        click.echo(f"warning: {exc}", err=True)
    if not events:
        click.echo("error: empty trace (no events)", err=True)
        sys.exit(EXIT_USAGE)
    click.echo(render_transcript(events), nl=False)
    try:
        summary = summarize(events)
    except IncompleteStream:
        click.echo("warning: trace has no session_end; summary unavailable", err=True)
        sys.exit(EXIT_OK if partial else EXIT_USAGE)
    click.echo(
        f"summary: stop_reason={summary.stop_reason} interactions={summary.total_interactions} "
        f"turns={summary.total_turns} tokens={summary.prompt_tokens}+{summary.completion_tokens} "
        f"cost=${summary.total_cost_dollars:.6f} elapsed={summary.elapsed_seconds:.3f}s"
    )
    sys.exit(EXIT_OK)


@main.command()
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--pattern", "pattern_name", default="one_tool_agent", show_default=True)
@click.option("--task", default="demo task", show_default=True)
@click.option("--budget", default=100, show_default=True, type=int)
@click.option("--interaction-delay", default=0.0, show_default=True, type=float)
@click.option("--trace-dir", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8470, show_default=True, type=int)
@click.option("--token", default=None, help="bearer token; required for non-loopback binds")
def serve(script_path, pattern_name, task, budget, interaction_delay, trace_dir, host, port, token) -> None:
    """Serve the control API over one scripted session (demo / console e2e)."""
    from .control_api import serve_scripted_session

    serve_scripted_session(
        script_path=script_path,
        pattern_name=pattern_name,
        task=task,
        budget=budget,
        interaction_delay=interaction_delay,
        trace_dir=trace_dir,
        host=host,
        port=port,
        token=token,
    )


if __name__ == "__main__":
    main()
