"""Evaluate a generated ontology (or a whole run) against a case."""

import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import httpx
from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import CaseError, MissingFile
from app.core.text import slugify
from app.evaluation.coverage import CoverageReport, CqVerdict, classify, coverage, minimal_module, superfluous
from app.evaluation.scoring import score
from app.models.common import GenerationMode
from app.models.dataset import Case
from app.models.ontology import Ontology, parse_turtle, serialize_turtle
from app.pipeline.store import load_run
from app.pitfalls.scanner import PitfallFinding, count_findings, scan
from app.reports.summary import RunSummary, save_summary

logger = logging.getLogger(__name__)

EVAL_DIR = "eval"
EXTERNAL = "external"


class Evaluation(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    summary: RunSummary
    reports: List[CoverageReport]
    verdicts: List[CqVerdict]
    findings: List[PitfallFinding]
    minimal: Dict[str, Ontology] = Field(default_factory=dict)


def evaluate(
    candidate: Ontology,
    case: Case,
    *,
    partials: Optional[Mapping[str, Optional[Ontology]]] = None,
    run_id: Optional[str] = None,
    technique: str = EXTERNAL,
    model_name: str = EXTERNAL,
    mode: Optional[str] = None,
    online: bool = False,
    transport: Optional[httpx.BaseTransport] = None,
) -> Evaluation:
    """Score every gold-backed CQ, then analyse the candidate as a whole.

    With ``partials`` (independent runs) each CQ is checked against its own
    output; superfluous elements and pitfalls always use ``candidate``.
    """
    reports: List[CoverageReport] = []
    verdicts: List[CqVerdict] = []
    minimal: Dict[str, Ontology] = {}
    for question in case.cqs:
        entry = case.gold.get(question.id)
        if entry is None:
            logger.debug("Skipping gold-less CQ %s", question.id)
            continue
        target = candidate
        if partials is not None:
            target = partials.get(question.id) or Ontology()
        report = coverage(target, entry, case.aliases)
        reports.append(report)
        verdicts.append(classify(report))
        minimal[question.id] = minimal_module(target, report)
        for diagnostic in report.diagnostics:
            logger.warning("%s %s: %s (%s)", question.id, diagnostic.code, diagnostic.message, diagnostic.subject)
    if not verdicts:
        raise CaseError(f"case {case.id} has no gold entries to evaluate against")

    used = set()
    for report in reports:
        used |= report.matched_terms()
    findings = scan(candidate, online=online, transport=transport)
    summary = RunSummary(
        run_id=run_id or slugify(f"{case.id}-{technique}-{model_name}", fallback="evaluation"),
        case_id=case.id,
        technique=technique,
        model_name=model_name,
        mode=mode,
        scores=score(verdicts, case.categories),
        pitfall_counts=count_findings(findings),
        superfluous=superfluous(candidate, used),
    )
    logger.info(
        "Evaluated %s on %s: strict %.2f, relaxed %.2f, %d pitfall finding(s)",
        summary.run_id,
        case.id,
        summary.scores.strict,
        summary.scores.relaxed,
        len(findings),
    )
    return Evaluation(summary=summary, reports=reports, verdicts=verdicts, findings=findings, minimal=minimal)


def evaluate_path(
    path: Path,
    case: Case,
    *,
    online: bool = False,
    transport: Optional[httpx.BaseTransport] = None,
) -> Evaluation:
    """Evaluate a run directory, or a standalone Turtle file."""
    if path.is_dir():
        run = load_run(path)
        if run.case_id != case.id:
            logger.warning("Run %s was generated for case %s, evaluating against %s", run.run_id, run.case_id, case.id)
        partials = None
        if run.mode is GenerationMode.INDEPENDENT:
            partials = {cq: outcome.ontology for cq, outcome in run.per_cq.items()}
        return evaluate(
            run.merged,
            case,
            partials=partials,
            run_id=run.run_id,
            technique=run.technique.value,
            model_name=run.model_name,
            mode=run.mode.value,
            online=online,
            transport=transport,
        )
    if not path.is_file():
        raise MissingFile(path)
    candidate = parse_turtle(path.read_text(encoding="utf-8-sig"))
    run_id = slugify(path.stem, fallback="candidate")
    return evaluate(candidate, case, run_id=run_id, online=online, transport=transport)


def _write_csv(path: Path, header: List[str], rows: List[List[object]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_evaluation(ev: Evaluation, out_dir: Path) -> Path:
    """Write coverage, verdict, superfluous and pitfall tables plus ``summary.json``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "coverage.csv",
        ["cq_id", "required", "kind", "matched", "method"],
        [
            [r.cq_id, m.required.iri, m.required.kind.value, m.matched, m.method.value]
            for r in ev.reports
            for m in r.matches
        ]
        + [[r.cq_id, t.iri, t.kind.value, "", "missing"] for r in ev.reports for t in r.missing],
    )
    _write_csv(
        out_dir / "verdicts.csv",
        ["cq_id", "status", "missing_count", "missing_kinds"],
        [[v.cq_id, v.status.value, v.missing_count, ";".join(k.value for k in v.missing_kinds)] for v in ev.verdicts],
    )
    _write_csv(
        out_dir / "superfluous.csv",
        ["kind", "superfluous", "total", "rate", "terms"],
        [
            [t.kind.value, t.count, t.total, "" if t.rate is None else repr(t.rate), ";".join(t.superfluous)]
            for t in ev.summary.superfluous.tallies()
        ],
    )
    _write_csv(
        out_dir / "pitfalls.csv",
        ["code", "subject", "explanation"],
        [[f.code.value, ";".join(f.subjects), f.explanation] for f in ev.findings],
    )
    minimal_dir = out_dir / "minimal"
    minimal_dir.mkdir(exist_ok=True)
    for cq_id, module in ev.minimal.items():
        (minimal_dir / f"{cq_id}.ttl").write_text(serialize_turtle(module), encoding="utf-8")
    (out_dir / "coverage.json").write_text(
        json.dumps([r.model_dump(mode="json") for r in ev.reports], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    save_summary(ev.summary, out_dir / "summary.json")
    return out_dir


__all__ = ["EVAL_DIR", "Evaluation", "evaluate", "evaluate_path", "write_evaluation"]
