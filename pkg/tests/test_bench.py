from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

import reference_rows as ref
from agentrange.bench import (
    BenchHarness,
    BenchmarkRecord,
    ChallengeManifest,
    aggregate,
    check_flag,
    floor_dollars,
    human_cost,
    load_manifest,
    parse_ratio,
    pass_at_1,
    ratio,
    read_records,
    round_ratio,
    write_records,
)
from agentrange.engine import Budget
from agentrange.errors import DivisionByZero, EmptyInput, ParseError, SetupFailure
from agentrange.gateway import ScriptedBackend
from agentrange.patterns import builtin_pattern
from agentrange.report import render_model_grid, render_report


def assert_ratio_cell(computed: str, published: str) -> None:
    """Integer cells must match exactly; sub-10 cells tolerate +/- 0.01."""
    a, b = parse_ratio(computed), parse_ratio(published)
    if b >= 10:
        assert computed == published
    else:
        assert abs(a - b) <= 0.01 + 1e-12, f"{computed} vs {published}"


def record_for(name, category, t_cai, t_human, c_cai=0.0, rate=48.50, **kwargs):
    return BenchmarkRecord(
        challenge_id=name,
        solved=True,
        first_attempt=True,
        t_cai_seconds=t_cai,
        c_cai_dollars=c_cai,
        interactions_used=1,
        stop_reason="completed",
        t_human_seconds=t_human,
        c_human_dollars=human_cost(t_human, rate),
        category=category,
        **kwargs,
    )


class TestRatioArithmetic:
    def test_rev_category_ratio(self):
        assert ratio(418789, 541) == pytest.approx(774.1017, abs=1e-3)

    def test_identity_ratio(self):
        assert ratio(123.0, 123.0) == 1.0

    def test_machines_sum_ratio(self):
        assert ratio(58207, 97414) == pytest.approx(0.5975, abs=1e-4)

    def test_zero_denominator(self):
        with pytest.raises(DivisionByZero):
            ratio(1.0, 0.0)


class TestRoundRatio:
    @pytest.mark.parametrize(
        "value,display",
        [
            (774.1, "774x"),
            (1.0567, "1.06x"),
            (0.45864, "0.46x"),
            (346.5546, "346x"),   # fraction dropped above 10
            (11.861, "11x"),
            (21975.789, "21975x"),
            (1.59615, "1.60x"),   # two decimals keep the trailing zero
            (10.597, "10x"),
            (0.0, "0.00x"),
            (9.994, "9.99x"),
            (9.996, "10x"),       # two-decimal rounding crosses into integer style
        ],
    )
    def test_display(self, value, display):
        assert round_ratio(value) == display

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            round_ratio(-0.1)

    @given(st.floats(min_value=0, max_value=1e6, allow_nan=False))
    def test_rounding_idempotence(self, value):
        once = round_ratio(value)
        assert round_ratio(parse_ratio(once)) == once


class TestHumanCost:
    def test_one_hour(self):
        assert human_cost(3600, 48.50) == 48.50

    def test_zero_seconds(self):
        assert human_cost(0, 999.0) == 0.0

    def test_robotics_cell_reconciles(self):
        # 302400 s = 84 h; 84 * 48.50 = 4074 exactly
        assert human_cost(302400, 48.50) == pytest.approx(4074.00, abs=1e-9)

    def test_unrounded(self):
        assert human_cost(38364, 48.50) == pytest.approx(516.8483, abs=1e-3)


class TestCategoryGolden:
    """Published category sums must reproduce every display cell."""

    def test_t_ratio_cells(self):
        for category, t_cai, _, t_human, _, cell in ref.CATEGORY_ROWS:
            assert_ratio_cell(round_ratio(ratio(t_human, t_cai)), cell)

    def test_total_row_11x(self):
        assert round_ratio(ratio(ref.CATEGORY_TOTAL_T_HUMAN, ref.CATEGORY_TOTAL_T_CAI)) == "11x"

    def test_human_cost_cells_at_48_50_floor(self):
        for _, _, _, t_human, cost_cell, _ in ref.CATEGORY_ROWS:
            assert floor_dollars(human_cost(t_human, 48.50)) == cost_cell

    def test_unrounded_total_rounds_to_17218(self):
        total = human_cost(ref.CATEGORY_TOTAL_T_HUMAN, 48.50)
        assert round(total) == 17218
        assert floor_dollars(total) == 17218
        # displayed cells sum two dollars short, confirming unrounded totals
        assert sum(cell for *_, cell, _ in ref.CATEGORY_ROWS) == 17216

    def test_caption_rate_48_54_reconciles_nothing_it_should(self):
        mismatched = [
            cost_cell
            for _, _, _, t_human, cost_cell, _ in ref.CATEGORY_ROWS
            if floor_dollars(human_cost(t_human, 48.54)) != cost_cell
        ]
        assert mismatched, "48.54 unexpectedly reconciled every cell"

    def test_cost_ratio_cells_reconcile_from_floored_cells(self):
        # published cost-ratio cells divide the floored human-cost cell by the
        # displayed agent cost
        published = ["6797x", "169x", "11x", "236x", "29x", "3067x", "617x"]
        for (_, _, c_cai, _, cost_cell, _), cell in zip(ref.CATEGORY_ROWS, published):
            assert round_ratio(ratio(cost_cell, c_cai)) == cell

    def test_aggregate_reproduces_sums_from_category_records(self):
        records = [
            record_for(category, category, t_cai, t_human, c_cai)
            for category, t_cai, c_cai, t_human, _, _ in ref.CATEGORY_ROWS
        ]
        rows = aggregate(records, "category")
        total = rows[-1]
        assert total.group_key == "total"
        assert total.sum_t_cai == ref.CATEGORY_TOTAL_T_CAI
        assert total.sum_t_human == ref.CATEGORY_TOTAL_T_HUMAN
        assert round_ratio(total.t_ratio) == ref.CATEGORY_TOTAL_RATIO


class TestDifficultyGolden:
    def test_t_ratio_cells(self):
        for _, t_cai, _, t_human, _, cell in ref.DIFFICULTY_ROWS:
            assert_ratio_cell(round_ratio(ratio(t_human, t_cai)), cell)

    def test_human_cost_cells(self):
        for _, _, _, t_human, cost_cell, _ in ref.DIFFICULTY_ROWS:
            assert floor_dollars(human_cost(t_human, 48.50)) == cost_cell

    def test_very_easy_row_cells(self):
        _, t_cai, c_cai, t_human, cost_cell, t_cell = ref.DIFFICULTY_ROWS[0]
        assert round_ratio(ratio(t_human, t_cai)) == t_cell == "799x"
        assert round_ratio(ratio(cost_cell, c_cai)) == ref.VERY_EASY_C_RATIO_CELL


class TestMachinesGolden:
    def records(self):
        return [
            record_for(name, None, t_cai, t_human, difficulty=level)
            for name, level, t_cai, t_human, _ in ref.MACHINE_ROWS
        ]

    def test_sums_and_total_ratio(self):
        rows = aggregate(self.records(), lambda r: "machines")
        total = rows[-1]
        assert total.sum_t_cai == ref.MACHINE_TOTAL_T_CAI
        assert abs(total.sum_t_human - ref.MACHINE_TOTAL_T_HUMAN) <= 1
        assert_ratio_cell(round_ratio(total.t_ratio), ref.MACHINE_TOTAL_RATIO)

    def test_per_machine_cells(self):
        for name, _, t_cai, t_human, cell in ref.MACHINE_ROWS:
            assert_ratio_cell(round_ratio(ratio(t_human, t_cai)), cell)

    def test_bigbang_row(self):
        row = next(r for r in ref.MACHINE_ROWS if r[0] == "BigBang")
        assert round_ratio(ratio(row[3], row[2])) == "1.06x"


class TestChallengesGolden:
    def test_sums_exact(self):
        assert sum(r[3] for r in ref.CHALLENGE_ROWS) == ref.CHALLENGE_TOTAL_T_CAI
        assert sum(r[4] for r in ref.CHALLENGE_ROWS) == ref.CHALLENGE_TOTAL_T_HUMAN

    def test_total_ratio_displays_346x(self):
        assert (
            round_ratio(ratio(ref.CHALLENGE_TOTAL_T_HUMAN, ref.CHALLENGE_TOTAL_T_CAI))
            == ref.CHALLENGE_TOTAL_RATIO
        )

    def test_per_challenge_cells(self):
        for name, _, _, t_cai, t_human, cell in ref.CHALLENGE_ROWS:
            assert_ratio_cell(round_ratio(ratio(t_human, t_cai)), cell)

    def test_aggregate_total_row(self):
        records = [
            record_for(name, category, t_cai, t_human)
            for name, category, _, t_cai, t_human, _ in ref.CHALLENGE_ROWS
        ]
        total = aggregate(records, "category")[-1]
        assert total.sum_t_cai == 2490
        assert total.sum_t_human == 862921
        assert round_ratio(total.t_ratio) == "346x"


class TestManifest:
    def write(self, tmp_path, entries):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(entries), encoding="utf-8")
        return path

    def entry(self, **over):
        base = {
            "id": "c1", "name": "c1", "category": "misc", "difficulty": "easy",
            "flag": "flag{x}", "task_prompt": "find it",
        }
        base.update(over)
        return base

    def test_bundled_manifest_loads(self):
        from agentrange import bundled_challenges_dir

        manifests = load_manifest(bundled_challenges_dir() / "manifest.json")
        assert len(manifests) == 5

    def test_unknown_category(self, tmp_path):
        with pytest.raises(ParseError, match="category"):
            load_manifest(self.write(tmp_path, [self.entry(category="cloud")]))

    def test_duplicate_id(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate"):
            load_manifest(self.write(tmp_path, [self.entry(), self.entry()]))

    def test_bad_regex_rejected_at_load(self, tmp_path):
        with pytest.raises(ParseError, match="regex"):
            load_manifest(self.write(tmp_path, [self.entry(flag="f(", flag_mode="regex")]))

    def test_empty_flag_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            load_manifest(self.write(tmp_path, [self.entry(flag="")]))


class TestCheckFlag:
    def manifest(self, **over):
        fields = dict(id="c", name="c", category="misc", difficulty="easy", flag="flag{abc}")
        fields.update(over)
        return ChallengeManifest(**fields)

    def test_exact_match(self):
        assert check_flag("flag{abc}", self.manifest())

    def test_surrounding_whitespace_trimmed(self):
        assert check_flag("  flag{abc}\n", self.manifest())

    def test_wrong_flag(self):
        assert not check_flag("flag{abd}", self.manifest())

    def test_regex_full_match(self):
        manifest = self.manifest(flag=r"flag\{[0-9]+\}", flag_mode="regex")
        assert check_flag("flag{123}", manifest)
        assert not check_flag("prefix flag{123}", manifest)


SOLVE_SCRIPT = [
    {"tool_calls": [{"name": "generic_linux_command", "arguments": {"command": "ls", "args": "-la"}}]},
    {"tool_calls": [{"name": "generic_linux_command", "arguments": {"command": "cat", "args": "flag.txt"}}]},
    {"text": "The flag is flag{harness_toy}."},
]
WANDER_SCRIPT = [{"tool_calls": [{"name": "generic_linux_command",
                                  "arguments": {"command": "ls", "args": ""}}], "repeat": 50}]


class TestRunChallenge:
    def manifest(self, **over):
        fields = dict(
            id="toy", name="toy", category="misc", difficulty="easy",
            flag="flag{harness_toy}",
            setup="printf 'flag{harness_toy}\\n' > flag.txt",
            task_prompt="find the flag",
            human_seconds=600,
        )
        fields.update(over)
        return ChallengeManifest(**fields)

    def harness(self, tmp_path, script, **kwargs):
        return BenchHarness(
            backend_factory=lambda m: ScriptedBackend.from_source(script),
            work_root=tmp_path / "work",
            **kwargs,
        )

    def test_flag_in_file_solved(self, tmp_path):
        harness = self.harness(tmp_path, SOLVE_SCRIPT)
        record = harness.run_challenge(builtin_pattern("one_tool_agent"), self.manifest())
        assert record.solved is True
        assert record.first_attempt is True
        assert record.interactions_used == 3
        assert record.stop_reason == "completed"
        assert record.c_human_dollars == pytest.approx(human_cost(600))

    def test_never_emitting_flag_exhausts_budget(self, tmp_path):
        harness = self.harness(tmp_path, WANDER_SCRIPT)
        record = harness.run_challenge(
            builtin_pattern("one_tool_agent"), self.manifest(), Budget(max_interactions=6)
        )
        assert record.solved is False
        assert record.stop_reason == "budget_exhausted"
        assert record.interactions_used == 6

    def test_setup_failure_starts_no_session(self, tmp_path):
        harness = self.harness(tmp_path, SOLVE_SCRIPT)
        with pytest.raises(SetupFailure):
            harness.run_challenge(
                builtin_pattern("one_tool_agent"), self.manifest(setup="false")
            )

    def test_flag_in_tool_output_alone_does_not_solve(self, tmp_path):
        # the flag must surface in an assistant message, not only in tool output
        script = [
            {"tool_calls": [{"name": "generic_linux_command",
                             "arguments": {"command": "cat", "args": "flag.txt"}}]},
            {"text": "I could not find anything."},
        ]
        record = self.harness(tmp_path, script).run_challenge(
            builtin_pattern("one_tool_agent"), self.manifest()
        )
        assert record.solved is False

    def test_parallel_matches_serial_up_to_timing(self, tmp_path):
        manifests = [self.manifest(id=f"c{i}", name=f"c{i}") for i in range(4)]
        harness = self.harness(tmp_path, SOLVE_SCRIPT, model="m")

        def strip_timing(records):
            return [
                (r.challenge_id, r.solved, r.interactions_used, r.stop_reason, r.c_cai_dollars)
                for r in records
            ]

        serial = harness.run_all(builtin_pattern("one_tool_agent"), manifests, parallel=1)
        parallel = harness.run_all(builtin_pattern("one_tool_agent"), manifests, parallel=4)
        assert strip_timing(serial) == strip_timing(parallel)


class TestAggregate:
    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            aggregate([])

    def test_single_record_group_echoes_fields(self):
        record = record_for("only", "web", 100.0, 400.0, c_cai=2.0)
        row = aggregate([record], "category")[0]
        assert row.sum_t_cai == 100.0 and row.sum_t_human == 400.0
        assert row.t_ratio == 4.0
        assert row.solved_count == 1 and row.record_count == 1

    def test_partition_property(self):
        records = [
            record_for(name, category, t_cai, t_human)
            for name, category, _, t_cai, t_human, _ in ref.CHALLENGE_ROWS
        ]
        by_category = aggregate(records, "category")
        by_difficulty = aggregate(records, "difficulty")
        assert by_category[-1].sum_t_cai == by_difficulty[-1].sum_t_cai
        assert sum(r.sum_t_cai for r in by_category[:-1]) == by_category[-1].sum_t_cai
        assert sum(r.sum_t_human for r in by_category[:-1]) == by_category[-1].sum_t_human

    def test_ratio_consistency(self):
        records = [record_for(f"r{i}", "misc", 10.0 + i, 100.0 * i + 1) for i in range(5)]
        for row in aggregate(records, "category"):
            if row.t_ratio is not None:
                assert row.t_ratio * row.sum_t_cai == pytest.approx(
                    row.sum_t_human, rel=1e-12
                )

    def test_missing_human_baseline_leaves_ratio_unset(self):
        record = record_for("x", "misc", 10.0, 100.0)
        record.t_human_seconds = None
        record.c_human_dollars = None
        row = aggregate([record], "category")[0]
        assert row.sum_t_human is None and row.t_ratio is None

    def test_pass_at_1_bounds(self):
        records = [record_for(f"r{i}", "misc", 1.0, 1.0) for i in range(4)]
        records[0].solved = False
        value = pass_at_1(records)
        assert value == 0.75 and 0.0 <= value <= 1.0


class TestRecordsFile:
    def test_round_trip(self, tmp_path):
        records = [record_for("a", "misc", 1.5, 10.0, model="m")]
        path = tmp_path / "records.jsonl"
        write_records(records, path)
        assert read_records(path) == records


class TestReports:
    def rows(self):
        records = [
            record_for(category, category, t_cai, t_human, c_cai)
            for category, t_cai, c_cai, t_human, _, _ in ref.CATEGORY_ROWS
        ]
        return aggregate(records, "category")

    def test_markdown_structure_category_rows_plus_total(self):
        text = render_report(self.rows(), "markdown")
        lines = text.splitlines()
        assert len(lines) == 2 + 7 + 1  # header, rule, 7 categories, total
        assert lines[0].startswith("| group |")
        assert lines[-1].startswith("| total |")
        assert "| 774x |" in text and "| 11x |" in lines[-1]

    def test_human_cost_cells_in_markdown(self):
        text = render_report(self.rows(), "markdown")
        for _, _, _, _, cost_cell, _ in ref.CATEGORY_ROWS:
            assert f"| {cost_cell} |" in text

    def test_csv_one_row(self):
        row = aggregate([record_for("a", "misc", 1.0, 2.0)], "category")[0]
        text = render_report([row], "csv")
        assert len(text.splitlines()) == 2

    def test_deterministic_bytes(self):
        rows = self.rows()
        assert render_report(rows, "markdown") == render_report(rows, "markdown")
        assert render_report(rows, "csv") == render_report(rows, "csv")


class TestModelGrid:
    def synthetic_records(self):
        records = []
        for model, solves in (("model-a", 3), ("model-b", 1)):
            for i, category in enumerate(("misc", "rev", "pwn", "web")):
                records.append(
                    BenchmarkRecord(
                        challenge_id=f"{model}-{category}",
                        solved=i < solves,
                        first_attempt=True,
                        t_cai_seconds=50.0 * (i + 1),
                        c_cai_dollars=0.5,
                        interactions_used=4,
                        stop_reason="completed" if i < solves else "budget_exhausted",
                        t_human_seconds=900.0,
                        c_human_dollars=human_cost(900.0),
                        category=category,
                        model=model,
                    )
                )
        return records

    def test_grid_shape(self):
        text = render_model_grid(self.synthetic_records())
        lines = text.splitlines()
        assert lines[0] == "| model | metric | misc | rev | pwn | web | forensics | total | cost_usd |"
        assert len(lines) == 2 + 2 * 3  # header, rule, three metric rows per model
        assert lines[2].startswith("| model-a | ctfs_solved |")
        assert lines[3].startswith("|  | t_cai_s |")
        assert lines[4].startswith("|  | t_ratio |")

    def test_best_model_listed_first(self):
        lines = render_model_grid(self.synthetic_records()).splitlines()
        assert "model-a" in lines[2] and "model-b" in lines[5]

    def test_unsolved_categories_render_dashes(self):
        text = render_model_grid(self.synthetic_records())
        assert "| - |" in text
