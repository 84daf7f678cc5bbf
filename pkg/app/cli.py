"""Command-line entry point: ``ontodraft [global flags] <command> ...``.

Exit codes: 0 success, 1 unexpected failure, 2 bad arguments or input,
3 case or ontology errors, 4 configuration, template or credential errors,
5 refusing to overwrite existing output.
"""

import argparse
import asyncio
import csv
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from app.core.config import get_settings, load_model_config
from app.core.errors import ConfigError, MissingFile, OntodraftError, OverwriteRefused
from app.core.logging import configure_logging
from app.evaluation.runner import EVAL_DIR, evaluate_path, write_evaluation
from app.evaluation.scoring import DEFAULT_POSITIVE_LABEL, agreement, read_ratings
from app.models.common import GenerationMode, Technique
from app.models.dataset import load_case, validate_case
from app.models.ontology import merge_all, parse_turtle
from app.pipeline.generation import GenerationContext
from app.pipeline.store import execute_run, prepare_output_dir
from app.pitfalls.scanner import scan
from app.prompts.engine import context_reduction
from app.reports.summary import RunSummary, load_summary
from app.reports.tables import render_tables

logger = logging.getLogger("app.cli")


def _read_ontology(path: Path):
    if not path.is_file():
        raise MissingFile(path)
    return parse_turtle(path.read_text(encoding="utf-8-sig"))


def cmd_generate(args: argparse.Namespace) -> int:
    if args.config is None:
        raise ConfigError("generate needs --config")
    case = load_case(args.case_dir)
    cfg = load_model_config(args.config)
    runs_dir = args.out or get_settings().runs_dir
    result = asyncio.run(
        execute_run(
            case,
            args.technique,
            args.mode,
            GenerationContext(cfg=cfg),
            runs_dir,
            run_id=args.run_id,
            force=args.force,
            base_namespace=args.base_namespace,
        )
    )
    failed = len(result.failures())
    print(runs_dir / result.run_id)
    if failed:
        print(f"{failed} of {len(result.cq_order)} CQs produced no ontology", file=sys.stderr)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    case = load_case(args.case_dir)
    target: Path = args.target
    if args.out is not None:
        out_dir = args.out
    elif target.is_dir():
        out_dir = target / EVAL_DIR
    else:
        out_dir = target.with_name(f"{target.stem}.{EVAL_DIR}")
    evaluation = evaluate_path(target, case, online=args.online_p37 or get_settings().online_p37)
    write_evaluation(evaluation, prepare_output_dir(out_dir, args.force))
    scores = evaluation.summary.scores
    print(f"strict {scores.strict:.2f}  relaxed {scores.relaxed:.2f}  ({scores.n} CQs)")
    print(out_dir)
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    ontology = _read_ontology(args.ttl)
    findings = scan(ontology, online=args.online_p37 or get_settings().online_p37)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        if args.out.exists() and not args.force:
            raise OverwriteRefused(args.out)
        handle = args.out.open("w", newline="", encoding="utf-8")
    else:
        handle = sys.stdout
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["code", "subject", "explanation"])
        for finding in findings:
            writer.writerow([finding.code.value, ";".join(finding.subjects), finding.explanation])
    finally:
        if handle is not sys.stdout:
            handle.close()
    return 0


def _summary_path(path: Path) -> Path:
    for candidate in (path, path / "summary.json", path / EVAL_DIR / "summary.json"):
        if candidate.is_file():
            return candidate
    raise MissingFile(path / EVAL_DIR / "summary.json")


def cmd_report(args: argparse.Namespace) -> int:
    summaries: List[RunSummary] = [load_summary(_summary_path(p)) for p in args.inputs]
    out_dir = prepare_output_dir(args.out or Path("report"), args.force)
    for path in render_tables(summaries, out_dir):
        print(path)
    return 0


def cmd_dataset_check(args: argparse.Namespace) -> int:
    case = load_case(args.case_dir)
    diagnostics = validate_case(case)
    for diagnostic in diagnostics:
        print(f"{diagnostic.subject or case.id}: {diagnostic.code}: {diagnostic.message}")
    print(
        f"case {case.id}: {len(case.cqs)} CQs, {len(case.gold)} gold entries, "
        f"{len(diagnostics)} diagnostic(s)"
    )
    return 0


def cmd_context(args: argparse.Namespace) -> int:
    case = load_case(args.case_dir)
    k = args.k or len(case.cqs)
    if args.prior is not None:
        prior = _read_ontology(args.prior)
    else:
        prior = merge_all(case.gold[q.id].gold_module for q in case.cqs[: k - 1] if q.id in case.gold)
    ratio = context_reduction(case, k, prior)
    print(f"context reduction at CQ {k} of {len(case.cqs)}: {ratio:.3f}")
    return 0


def cmd_kappa(args: argparse.Namespace) -> int:
    a, b = read_ratings(args.csv)
    result = agreement(a, b, args.positive)
    print(f"items {result.n}")
    print(f"kappa {result.kappa:.4f}")
    print(f"adequacy {result.adequacy_a:.2f} / {result.adequacy_b:.2f} (mean {result.mean_adequacy:.2f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ontodraft", description="Draft OWL ontologies with LLMs and evaluate them")
    p.add_argument("--config", type=Path, help="Model configuration YAML (generate)")
    p.add_argument("--out", type=Path, help="Output directory (or file for scan)")
    p.add_argument("--force", action="store_true", help="Overwrite existing outputs")
    p.add_argument("--online-p37", action="store_true", help="Dereference ontology IRIs when checking P37")
    p.add_argument("--log-level", default=None, help="Logging level (default from ONTODRAFT_LOG_LEVEL)")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Generate ontologies for a case")
    gen.add_argument("case_dir", type=Path)
    gen.add_argument("--technique", type=Technique.parse, required=True, help="MemorylessCQbyCQ or Ontogenia")
    gen.add_argument("--mode", type=GenerationMode, choices=list(GenerationMode), required=True)
    gen.add_argument("--run-id", default=None, help="Override the derived run id")
    gen.add_argument("--base-namespace", default=None, help="Rewrite throwaway namespaces under this IRI")
    gen.set_defaults(handler=cmd_generate)

    ev = sub.add_parser("evaluate", help="Evaluate a run directory or Turtle file against a case")
    ev.add_argument("target", type=Path)
    ev.add_argument("case_dir", type=Path)
    ev.set_defaults(handler=cmd_evaluate)

    sc = sub.add_parser("scan", help="Scan a Turtle file for critical pitfalls")
    sc.add_argument("ttl", type=Path)
    sc.set_defaults(handler=cmd_scan)

    rep = sub.add_parser("report", help="Render report tables from evaluated runs")
    rep.add_argument("inputs", type=Path, nargs="+", help="summary.json files, eval dirs or run dirs")
    rep.set_defaults(handler=cmd_report)

    ds = sub.add_parser("dataset", help="Dataset utilities")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)
    check = ds_sub.add_parser("check", help="Validate a case directory")
    check.add_argument("case_dir", type=Path)
    check.set_defaults(handler=cmd_dataset_check)

    ctx = sub.add_parser("context", help="Measure prompt-size reduction of Memoryless over Ontogenia")
    ctx.add_argument("case_dir", type=Path)
    ctx.add_argument("--k", type=int, default=None, help="1-based CQ index (default: last)")
    ctx.add_argument("--prior", type=Path, default=None, help="Ontology to embed as prior (default: earlier gold)")
    ctx.set_defaults(handler=cmd_context)

    kp = sub.add_parser("kappa", help="Cohen's kappa and adequacy for two raters")
    kp.add_argument("csv", type=Path, help="CSV with a header row and two label columns")
    kp.add_argument("--positive", default=DEFAULT_POSITIVE_LABEL, help="Label meaning 'adequate'")
    kp.set_defaults(handler=cmd_kappa)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging((args.log_level or get_settings().log_level).upper())
    try:
        return args.handler(args)
    except OntodraftError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("Unexpected failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
