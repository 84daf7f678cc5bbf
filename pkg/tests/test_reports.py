"""Tests for run summaries and the rendered report tables."""

import pytest

from app.core.errors import EmptyInput, MissingFile
from app.evaluation.coverage import KindTally, SuperfluousReport
from app.evaluation.scoring import CategoryScore, Scores
from app.models.common import CqCategory, TermKind
from app.reports.summary import RunSummary, load_summary, save_summary
from app.reports.tables import (
    category_table,
    format_rate,
    pitfall_table,
    read_scores_csv,
    render_tables,
    superfluous_table,
)


def tally(kind: TermKind, count: int, total: int) -> KindTally:
    return KindTally(kind=kind, superfluous=[f"http://example.org/x#t{i}" for i in range(count)], total=total)


def summary(
    run_id: str = "r1",
    case_id: str = "book",
    technique: str = "Ontogenia",
    model: str = "gpt-4o",
    pitfalls=None,
    classes=(0, 0),
    object_properties=(0, 0),
    data_properties=(0, 0),
    strict: float = 0.5,
    relaxed: float = 0.75,
    per_category=None,
) -> RunSummary:
    return RunSummary(
        run_id=run_id,
        case_id=case_id,
        technique=technique,
        model_name=model,
        mode="incremental",
        scores=Scores(n=4, modelled=2, minor=1, strict=strict, relaxed=relaxed, per_category=per_category or {}),
        pitfall_counts=pitfalls or {},
        superfluous=SuperfluousReport(
            classes=tally(TermKind.CLASS, *classes),
            object_properties=tally(TermKind.OBJECT_PROPERTY, *object_properties),
            data_properties=tally(TermKind.DATA_PROPERTY, *data_properties),
        ),
    )


class TestPitfallTable:
    def test_counts_are_summed_per_column(self):
        header, rows = pitfall_table(
            [
                summary("r1", case_id="book", pitfalls={"P19": 20}),
                summary("r2", case_id="library", pitfalls={"P19": 3, "P06": 1}),
            ]
        )
        assert header == ["Pitfall", "Description", "Ontogenia (gpt-4o)"]
        by_code = {row[0]: row for row in rows}
        assert by_code["P19"][2] == 23
        assert by_code["P06"][2] == 1
        assert by_code["P05"][2] == 0
        assert [row[0] for row in rows] == ["P05", "P06", "P19", "P29", "P37", "P39"]

    def test_one_column_per_technique_and_model(self):
        header, _ = pitfall_table([summary(model="gpt-4o"), summary(technique="MemorylessCQbyCQ", model="gpt-4o")])
        assert header[2:] == ["MemorylessCQbyCQ (gpt-4o)", "Ontogenia (gpt-4o)"]


class TestSuperfluousTable:
    def test_format_rate(self):
        assert format_rate(1 / 3) == "33.3"
        assert format_rate(0.0) == "0.0"
        assert format_rate(None) == "-"

    def test_rates_pool_over_runs(self):
        header, rows = superfluous_table(
            [summary("r1", classes=(1, 2)), summary("r2", classes=(0, 1), data_properties=(1, 4))]
        )
        assert header == ["Method", "Classes / book", "Object properties / book", "Data properties / book"]
        assert rows == [["Ontogenia (gpt-4o)", "33.3", "-", "25.0"]]


class TestCategoryTable:
    def test_weighted_by_cq_count(self):
        _, rows = category_table(
            [
                summary("r1", per_category={CqCategory.REIFICATION: CategoryScore(n=2, strict=1.0, relaxed=1.0)}),
                summary("r2", per_category={CqCategory.REIFICATION: CategoryScore(n=2, strict=0.0, relaxed=0.5)}),
            ]
        )
        header = ["Method"] + [c.value for c in CqCategory]
        row = dict(zip(header, rows[0]))
        assert row["Reification"] == "0.50 (0.75)"
        assert row["ObjectProperty"] == "-"


class TestRenderTables:
    def test_files_and_marks(self, tmp_path):
        written = render_tables(
            [summary(classes=(1, 10), object_properties=(3, 5), data_properties=(0, 0))], tmp_path / "report"
        )
        assert sorted(p.name for p in written) == [
            "categories.csv",
            "pitfalls.csv",
            "report.md",
            "scores.csv",
            "superfluous.csv",
        ]
        markdown = (tmp_path / "report" / "report.md").read_text(encoding="utf-8")
        assert "| Ontogenia (gpt-4o) | **10.0** | 60.0 (!) | - |" in markdown
        assert "local scanner" in markdown
        assert "10.0,60.0,-" in (tmp_path / "report" / "superfluous.csv").read_text(encoding="utf-8")

    def test_identical_inputs_identical_bytes(self, tmp_path):
        runs = [summary("r2", case_id="library", pitfalls={"P39": 1}), summary("r1", classes=(1, 3))]
        render_tables(runs, tmp_path / "a")
        render_tables(list(reversed(runs)), tmp_path / "b")
        for name in ("pitfalls.csv", "superfluous.csv", "scores.csv", "categories.csv", "report.md"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_scores_round_trip(self, tmp_path):
        render_tables([summary("r1", strict=1 / 3, relaxed=2 / 3)], tmp_path)
        assert read_scores_csv(tmp_path / "scores.csv") == [("r1", 1 / 3, 2 / 3)]

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyInput):
            render_tables([], tmp_path)

    def test_missing_scores_file(self, tmp_path):
        with pytest.raises(MissingFile):
            read_scores_csv(tmp_path / "scores.csv")


class TestSummaryFile:
    def test_save_and_load(self, tmp_path):
        original = summary(
            pitfalls={"P19": 2},
            classes=(1, 3),
            per_category={CqCategory.DATA_PROPERTY: CategoryScore(n=1, strict=1.0, relaxed=1.0)},
        )
        path = save_summary(original, tmp_path / "eval" / "summary.json")
        assert load_summary(path) == original
        assert load_summary(path).column == "Ontogenia (gpt-4o)"

    def test_missing(self, tmp_path):
        with pytest.raises(MissingFile):
            load_summary(tmp_path / "summary.json")
