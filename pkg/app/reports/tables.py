"""Pitfall, superfluous-rate, score and per-category tables in CSV and Markdown.

Pitfall counts come from the local structural scanner, not from an external
pitfall service, and the Markdown heading says so.
"""

import csv
import io
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from app.core.errors import EmptyInput, MissingFile
from app.models.common import CqCategory, TermKind
from app.pitfalls.scanner import PitfallCode
from app.reports.summary import RunSummary

logger = logging.getLogger(__name__)

LOW_RATE = 15.0
HIGH_RATE = 50.0
UNDEFINED = "-"
SCORE_COLUMNS = ["run_id", "case_id", "technique", "model", "strict", "IG"]
KIND_HEADINGS = {
    TermKind.CLASS: "Classes",
    TermKind.OBJECT_PROPERTY: "Object properties",
    TermKind.DATA_PROPERTY: "Data properties",
}


def _csv(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _markdown(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(str(cell) for cell in row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


def _columns(summaries: Sequence[RunSummary]) -> List[str]:
    return sorted({s.column for s in summaries})


def format_rate(rate: Optional[float]) -> str:
    return UNDEFINED if rate is None else "%.1f" % (rate * 100)


def _mark(cell: str) -> str:
    if cell == UNDEFINED:
        return cell
    value = float(cell)
    if value < LOW_RATE:
        return f"**{cell}**"
    if value > HIGH_RATE:
        return f"{cell} (!)"
    return cell


def pitfall_table(summaries: Sequence[RunSummary]) -> Tuple[List[str], List[List[object]]]:
    """Rows are pitfall codes, columns (technique, model); counts summed over cases."""
    columns = _columns(summaries)
    rows: List[List[object]] = []
    for code in PitfallCode:
        counts = {column: 0 for column in columns}
        for s in summaries:
            counts[s.column] += s.pitfall_counts.get(code.value, 0)
        rows.append([code.value, code.label] + [counts[c] for c in columns])
    return ["Pitfall", "Description"] + columns, rows


def superfluous_table(summaries: Sequence[RunSummary]) -> Tuple[List[str], List[List[str]]]:
    """Rows (technique, model), columns kind x case; rates pool counts across runs."""
    cases = sorted({s.case_id for s in summaries})
    header = ["Method"] + [f"{KIND_HEADINGS[kind]} / {case}" for kind in TermKind for case in cases]
    rows: List[List[str]] = []
    for column in _columns(summaries):
        row = [column]
        for kind in TermKind:
            for case in cases:
                pooled = [s.superfluous.tally(kind) for s in summaries if s.column == column and s.case_id == case]
                total = sum(t.total for t in pooled)
                row.append(format_rate(sum(t.count for t in pooled) / total if total else None))
        rows.append(row)
    return header, rows


def score_rows(summaries: Sequence[RunSummary]) -> List[List[object]]:
    return [
        [s.run_id, s.case_id, s.technique, s.model_name, repr(s.scores.strict), repr(s.scores.relaxed)]
        for s in summaries
    ]


def category_table(summaries: Sequence[RunSummary]) -> Tuple[List[str], List[List[str]]]:
    """Per-category scores pooled over cases, as ``strict (relaxed)``."""
    header = ["Method"] + [c.value for c in CqCategory]
    rows: List[List[str]] = []
    for column in _columns(summaries):
        row = [column]
        for category in CqCategory:
            scored = [
                s.scores.per_category[category]
                for s in summaries
                if s.column == column and category in s.scores.per_category
            ]
            n = sum(c.n for c in scored)
            if not n:
                row.append(UNDEFINED)
                continue
            strict = sum(c.strict * c.n for c in scored) / n
            relaxed = sum(c.relaxed * c.n for c in scored) / n
            row.append(f"{strict:.2f} ({relaxed:.2f})")
        rows.append(row)
    return header, rows


def render_tables(summaries: Sequence[RunSummary], out_dir: Path) -> List[Path]:
    """Write every report table; identical summaries always give identical bytes."""
    if not summaries:
        raise EmptyInput("no run summaries to report")
    ordered = sorted(summaries, key=RunSummary.sort_key)
    out_dir.mkdir(parents=True, exist_ok=True)

    pit_header, pit_rows = pitfall_table(ordered)
    sup_header, sup_rows = superfluous_table(ordered)
    cat_header, cat_rows = category_table(ordered)
    score_data = score_rows(ordered)

    outputs: Dict[str, str] = {
        "pitfalls.csv": _csv(pit_header, pit_rows),
        "superfluous.csv": _csv(sup_header, sup_rows),
        "scores.csv": _csv(SCORE_COLUMNS, score_data),
        "categories.csv": _csv(cat_header, cat_rows),
    }
    marked_rows = [[row[0]] + [_mark(cell) for cell in row[1:]] for row in sup_rows]
    score_table = _markdown(
        ["Run", "Case", "Method", "Strict", "Ignoring minor issues"],
        [[s.run_id, s.case_id, s.column, f"{s.scores.strict:.2f}", f"{s.scores.relaxed:.2f}"] for s in ordered],
    )
    outputs["report.md"] = "\n".join(
        [
            "# Ontology generation report",
            "",
            "## Critical pitfalls (local scanner)",
            "",
            _markdown(pit_header, pit_rows),
            "## Superfluous elements (% of total)",
            "",
            f"Rates under {LOW_RATE:.0f}% are in bold; rates over {HIGH_RATE:.0f}% are marked (!).",
            "",
            _markdown(sup_header, marked_rows),
            "## Proportion of modelled CQs",
            "",
            score_table,
            "## Modelled CQs by category, strict (ignoring minor issues)",
            "",
            _markdown(cat_header, cat_rows),
        ]
    )

    written: List[Path] = []
    for name, content in outputs.items():
        path = out_dir / name
        path.write_text(content, encoding="utf-8")
        written.append(path)
    logger.info("Rendered %d report files for %d run(s) into %s", len(written), len(ordered), out_dir)
    return written


def read_scores_csv(path: Path) -> List[Tuple[str, float, float]]:
    """``(run_id, strict, relaxed)`` rows of a rendered ``scores.csv``."""
    if not path.is_file():
        raise MissingFile(path)
    with path.open(newline="", encoding="utf-8") as handle:
        return [(row["run_id"], float(row["strict"]), float(row["IG"])) for row in csv.DictReader(handle)]


__all__ = [
    "category_table",
    "format_rate",
    "pitfall_table",
    "read_scores_csv",
    "render_tables",
    "superfluous_table",
]
