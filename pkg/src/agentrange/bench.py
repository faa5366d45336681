"""CTF-style benchmark harness.

Loads challenge manifests, runs one fresh stateless session per challenge,
checks flags against assistant output, and aggregates per-group time/cost
sums into ratio rows (human-over-agent, so values above 1 mean the agent
beat the human baseline).

Leaderboard placements, live-competition scores and per-model dollar totals
from published evaluations are inputs, not reproducible outputs, at desk
scale; see NONREPRODUCIBLE_RESULTS.
"""

from __future__ import annotations

import json
import math
import re
import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Callable, Iterable

from .clock import Clock
from .engine import Budget, Engine, Session
from .errors import DivisionByZero, EmptyInput, ParseError, SetupFailure
from .gateway import ChatBackend, PriceTable
from .patterns import Pattern
from .toolkit import BENIGN_PROGRAMS, ExecPolicy, ToolRegistry
from .trace import TraceSink

CATEGORIES = ("rev", "misc", "pwn", "web", "crypto", "forensics", "robotics")
DIFFICULTIES = ("very_easy", "easy", "medium", "hard", "insane")

# Reconciles every published per-category human-cost cell under floor display;
# the captioned 48.54 $/h reproduces none of them and stays available as an
# explicit override only.
DEFAULT_HOURLY_RATE = 48.50
CAPTION_HOURLY_RATE = 48.54

SETUP_TIMEOUT_S = 60.0

# Results that depend on third-party platforms or unpublished raw data and
# therefore stay out of scope for this harness. The report shapes are still
# reproduced from synthetic or bundled records.
NONREPRODUCIBLE_RESULTS = (
    "platform leaderboard rankings",
    "live competition placements and prize scores",
    "bug bounty findings and CVSS ratings",
    "per-model dollar totals (inputs to golden tests, not recomputed from tokens)",
)


@dataclass(frozen=True)
class ChallengeManifest:
    id: str
    name: str
    category: str
    difficulty: str
    flag: str
    flag_mode: str = "exact"
    human_seconds: float | None = None
    setup: str | None = None
    task_prompt: str = ""

    def __post_init__(self) -> None:
        if not self.flag:
            raise ParseError(f"challenge {self.id}: flag must be nonempty")
        if self.category not in CATEGORIES:
            raise ParseError(f"challenge {self.id}: unknown category {self.category!r}")
        if self.difficulty not in DIFFICULTIES:
            raise ParseError(f"challenge {self.id}: unknown difficulty {self.difficulty!r}")
        if self.flag_mode not in ("exact", "regex"):
            raise ParseError(f"challenge {self.id}: unknown flag_mode {self.flag_mode!r}")
        if self.human_seconds is not None and self.human_seconds <= 0:
            raise ParseError(f"challenge {self.id}: human_seconds must be > 0")


def load_manifest(path: str | Path) -> list[ChallengeManifest]:
    """Ordered challenge list; every invariant checked with an entry locator."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"manifest {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ParseError(f"manifest {path}: must be a JSON list")
    manifests: list[ChallengeManifest] = []
    seen: set[str] = set()
    for index, item in enumerate(raw):
        try:
            manifest = ChallengeManifest(
                id=item["id"],
                name=item.get("name", item["id"]),
                category=item["category"],
                difficulty=item["difficulty"],
                flag=item["flag"],
                flag_mode=item.get("flag_mode", "exact"),
                human_seconds=item.get("human_seconds"),
                setup=item.get("setup"),
                task_prompt=item.get("task_prompt", ""),
            )
        except KeyError as exc:
            raise ParseError(f"entry {index}: missing key {exc}") from exc
        if manifest.flag_mode == "regex":
            try:
                re.compile(manifest.flag)
            except re.error as exc:
                raise ParseError(f"entry {index} ({manifest.id}): bad flag regex: {exc}") from exc
        if manifest.id in seen:
            raise ParseError(f"entry {index}: duplicate id {manifest.id!r}")
        seen.add(manifest.id)
        manifests.append(manifest)
    return manifests


def check_flag(candidate: str, manifest: ChallengeManifest) -> bool:
    """Exact mode compares after trimming surrounding whitespace; regex mode
    requires a full match of the pattern."""
    if manifest.flag_mode == "exact":
        return candidate.strip() == manifest.flag
    return re.fullmatch(manifest.flag, candidate) is not None


def flag_in_text(text: str, manifest: ChallengeManifest) -> bool:
    """Substring scan for exact flags; per-line full match for regex flags."""
    if manifest.flag_mode == "exact":
        return manifest.flag in text
    return any(re.fullmatch(manifest.flag, line.strip()) for line in text.splitlines())


def session_solved(session: Session, manifest: ChallengeManifest) -> bool:
    return any(
        message.role == "assistant" and message.content and flag_in_text(message.content, manifest)
        for message in session.history
    )


@dataclass
class BenchmarkRecord:
    challenge_id: str
    solved: bool
    first_attempt: bool
    t_cai_seconds: float
    c_cai_dollars: float
    interactions_used: int
    stop_reason: str
    t_human_seconds: float | None = None
    c_human_dollars: float | None = None
    category: str | None = None
    difficulty: str | None = None
    model: str | None = None

    _FIELDS = (
        "challenge_id", "solved", "first_attempt", "t_cai_seconds", "c_cai_dollars",
        "interactions_used", "stop_reason", "t_human_seconds", "c_human_dollars",
        "category", "difficulty", "model",
    )

    def to_json_line(self) -> str:
        return json.dumps(
            {name: getattr(self, name) for name in self._FIELDS},
            ensure_ascii=False,
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "BenchmarkRecord":
        raw = json.loads(line)
        return cls(**{name: raw.get(name) for name in cls._FIELDS})


# --- ratio arithmetic ---

def human_cost(seconds: float, hourly_rate: float = DEFAULT_HOURLY_RATE) -> float:
    """Unrounded dollar cost of human time at the given hourly rate."""
    if seconds < 0:
        raise ValueError("seconds must be >= 0")
    if hourly_rate < 0:
        raise ValueError("hourly_rate must be >= 0")
    return seconds / 3600.0 * hourly_rate


def floor_dollars(amount: float) -> int:
    """Display convention for human-cost cells: floored whole dollars."""
    return math.floor(amount)


def ratio(human: float, cai: float) -> float:
    """Human-over-agent ratio on unrounded values; > 1 means the agent won."""
    if cai == 0:
        raise DivisionByZero("ratio denominator is zero")
    return human / cai


def round_ratio(x: float) -> str:
    """Display text for a ratio.

    Values >= 10 print as whole numbers (fraction dropped); smaller values
    keep two decimals, half rounded away from zero. Matches the published
    tables' cells, whose >= 10 entries are floored rather than rounded to
    nearest.
    """
    if x < 0:
        raise ValueError("ratio must be >= 0")
    if x >= 10:
        return f"{math.floor(x)}x"
    two = Decimal(str(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    if two >= 10:
        return "10x"
    return f"{two}x"


def parse_ratio(text: str) -> float:
    if not text.endswith("x"):
        raise ValueError(f"not a ratio display: {text!r}")
    return float(text[:-1])


@dataclass
class MetricRow:
    group_key: str
    sum_t_cai: float
    sum_c_cai: float
    sum_t_human: float | None
    sum_c_human: float | None
    t_ratio: float | None
    c_ratio: float | None
    solved_count: int
    record_count: int

    @property
    def pass_at_1(self) -> float:
        return self.solved_count / self.record_count if self.record_count else 0.0


def _group_key_fn(key: str | Callable[[BenchmarkRecord], str]) -> Callable[[BenchmarkRecord], str]:
    if callable(key):
        return key
    return lambda record: str(getattr(record, key) or "unknown")


def _row(group_key: str, records: list[BenchmarkRecord]) -> MetricRow:
    sum_t_cai = sum(r.t_cai_seconds for r in records)
    sum_c_cai = sum(r.c_cai_dollars for r in records)
    humans_t = [r.t_human_seconds for r in records if r.t_human_seconds is not None]
    humans_c = [r.c_human_dollars for r in records if r.c_human_dollars is not None]
    sum_t_human = sum(humans_t) if humans_t else None
    sum_c_human = sum(humans_c) if humans_c else None
    t_ratio = ratio(sum_t_human, sum_t_cai) if sum_t_human is not None and sum_t_cai > 0 else None
    c_ratio = ratio(sum_c_human, sum_c_cai) if sum_c_human is not None and sum_c_cai > 0 else None
    solved = sum(1 for r in records if r.solved and r.first_attempt)
    return MetricRow(
        group_key=group_key,
        sum_t_cai=sum_t_cai,
        sum_c_cai=sum_c_cai,
        sum_t_human=sum_t_human,
        sum_c_human=sum_c_human,
        t_ratio=t_ratio,
        c_ratio=c_ratio,
        solved_count=solved,
        record_count=len(records),
    )


def aggregate(
    records: Iterable[BenchmarkRecord],
    key: str | Callable[[BenchmarkRecord], str] = "category",
) -> list[MetricRow]:
    """Per-group rows over unrounded sums, plus a grand-total row.

    The total row folds the group sums so any disjoint grouping partitions
    the totals exactly.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no records to aggregate")
    key_fn = _group_key_fn(key)
    groups: dict[str, list[BenchmarkRecord]] = {}
    for record in records:
        groups.setdefault(key_fn(record), []).append(record)
    rows = [_row(group, groups[group]) for group in sorted(groups)]
    total_t_cai = sum(row.sum_t_cai for row in rows)
    total_c_cai = sum(row.sum_c_cai for row in rows)
    humans_t = [row.sum_t_human for row in rows if row.sum_t_human is not None]
    humans_c = [row.sum_c_human for row in rows if row.sum_c_human is not None]
    total_t_human = sum(humans_t) if humans_t else None
    total_c_human = sum(humans_c) if humans_c else None
    rows.append(
        MetricRow(
            group_key="total",
            sum_t_cai=total_t_cai,
            sum_c_cai=total_c_cai,
            sum_t_human=total_t_human,
            sum_c_human=total_c_human,
            t_ratio=ratio(total_t_human, total_t_cai)
            if total_t_human is not None and total_t_cai > 0
            else None,
            c_ratio=ratio(total_c_human, total_c_cai)
            if total_c_human is not None and total_c_cai > 0
            else None,
            solved_count=sum(row.solved_count for row in rows),
            record_count=sum(row.record_count for row in rows),
        )
    )
    return rows


def pass_at_1(records: Iterable[BenchmarkRecord]) -> float:
    records = list(records)
    if not records:
        raise EmptyInput("no records")
    return sum(1 for r in records if r.solved and r.first_attempt) / len(records)


# --- challenge execution ---

# The bench allowlist extends the benign set with the read-only archive and
# interpreter programs the bundled challenges need.
BENCH_PROGRAMS = tuple(sorted(set(BENIGN_PROGRAMS) | {"python3", "grep", "xxd", "strings"}))


class BenchHarness:
    """Runs challenges with fresh sessions and collects benchmark records."""

    def __init__(
        self,
        *,
        backend_factory: Callable[[ChallengeManifest], ChatBackend],
        work_root: str | Path,
        registry: ToolRegistry | None = None,
        sink: TraceSink | None = None,
        prices: PriceTable | None = None,
        model: str = "default",
        hourly_rate: float = DEFAULT_HOURLY_RATE,
        policy_programs: tuple[str, ...] = BENCH_PROGRAMS,
        clock_factory: Callable[[], Clock] | None = None,
        id_source: Callable[[], str] | None = None,
    ):
        self.backend_factory = backend_factory
        self.work_root = Path(work_root)
        self.registry = registry
        self.sink = sink
        self.prices = prices
        self.model = model
        self.hourly_rate = hourly_rate
        self.policy_programs = policy_programs
        self.clock_factory = clock_factory or Clock
        self.id_source = id_source

    def _prepare_workdir(self, manifest: ChallengeManifest) -> Path:
        workdir = self.work_root / manifest.id
        if workdir.exists():
            shutil.rmtree(workdir)
        workdir.mkdir(parents=True)
        if manifest.setup:
            proc = subprocess.run(
                manifest.setup,
                shell=True,
                cwd=workdir,
                capture_output=True,
                timeout=SETUP_TIMEOUT_S,
            )
            if proc.returncode != 0:
                raise SetupFailure(
                    f"{manifest.id}: setup exited {proc.returncode}: "
                    f"{proc.stderr.decode('utf-8', errors='replace').strip()}"
                )
        return workdir

    def run_challenge(
        self,
        pattern: Pattern,
        manifest: ChallengeManifest,
        budget: Budget | None = None,
    ) -> BenchmarkRecord:
        """One fresh session per attempt; solved iff the flag shows up in any
        assistant message."""
        workdir = self._prepare_workdir(manifest)
        policy = ExecPolicy(entries=self.policy_programs, working_dir=str(workdir))
        engine = Engine(
            backend=self.backend_factory(manifest),
            registry=self.registry,
            sink=self.sink,
            prices=self.prices,
            policy=policy,
            clock=self.clock_factory(),
            id_source=self.id_source,
        )
        session = engine.create_session(pattern, manifest.task_prompt, budget)
        engine.run(session, success_predicate=lambda s: session_solved(s, manifest))
        summary = engine.session_summary(session)
        human_seconds = manifest.human_seconds
        return BenchmarkRecord(
            challenge_id=manifest.id,
            solved=bool(summary.solved),
            first_attempt=True,
            t_cai_seconds=summary.elapsed_seconds,
            c_cai_dollars=summary.total_cost_dollars,
            interactions_used=summary.total_interactions,
            stop_reason=summary.stop_reason or "error",
            t_human_seconds=human_seconds,
            c_human_dollars=human_cost(human_seconds, self.hourly_rate)
            if human_seconds is not None
            else None,
            category=manifest.category,
            difficulty=manifest.difficulty,
            model=self.model,
        )

    def run_all(
        self,
        pattern: Pattern,
        manifests: list[ChallengeManifest],
        budget: Budget | None = None,
        parallel: int = 1,
    ) -> list[BenchmarkRecord]:
        """Challenges may run fully in parallel; sessions are isolated."""
        if parallel <= 1:
            return [self.run_challenge(pattern, m, budget) for m in manifests]
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(self.run_challenge, pattern, m, budget) for m in manifests]
            return [f.result() for f in futures]


def write_records(records: Iterable[BenchmarkRecord], path: str | Path) -> None:
    Path(path).write_text(
        "".join(record.to_json_line() + "\n" for record in records), encoding="utf-8"
    )


def read_records(path: str | Path) -> list[BenchmarkRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [BenchmarkRecord.from_json_line(line) for line in lines if line.strip()]
