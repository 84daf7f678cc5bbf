"""Run directories: ``manifest.json``, ``prompts/``, ``partial/<cq>.ttl``, ``merged.ttl``, ``log.txt``."""

import json
import logging
import shutil
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

from app.core.config import ModelConfig
from app.core.errors import MissingFile, OverwriteRefused
from app.core.logging import attach_run_log, detach_run_log
from app.models.common import GenerationMode, Technique
from app.models.dataset import Case
from app.models.ontology import Ontology, parse_turtle, serialize_turtle
from app.pipeline.generation import (
    CqOutcome,
    GenerationContext,
    RunResult,
    as_context,
    generate_incremental,
    generate_independent,
    make_run_id,
    normalize_namespaces,
)

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
MERGED = "merged.ttl"
LOG_FILE = "log.txt"
PROMPTS_DIR = "prompts"
PARTIAL_DIR = "partial"


def prepare_output_dir(path: Path, force: bool) -> Path:
    """Create an empty directory; an existing non-empty one needs ``force``."""
    if path.exists() and (path.is_file() or any(path.iterdir())):
        if not force:
            raise OverwriteRefused(path)
        logger.info("Overwriting %s", path)
        if path.is_file():
            path.unlink()
        else:
            shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")


def save_run(r: RunResult, run_dir: Path, cfg: Optional[ModelConfig] = None) -> Path:
    partial_dir = run_dir / PARTIAL_DIR
    partial_dir.mkdir(parents=True, exist_ok=True)
    per_cq: Dict[str, Dict[str, Any]] = {}
    for cq_id in r.cq_order:
        outcome = r.per_cq.get(cq_id)
        if outcome is None:
            continue
        entry: Dict[str, Any] = {"attempts": outcome.attempts, "prompt_chars": outcome.prompt_chars}
        if outcome.ok:
            relative = f"{PARTIAL_DIR}/{cq_id}.ttl"
            (run_dir / relative).write_text(serialize_turtle(outcome.ontology), encoding="utf-8")
            entry.update(status="ok", file=relative, triples=len(outcome.ontology.triples))
        else:
            entry.update(status="failed", error_type=outcome.error_type, error=outcome.error)
        per_cq[cq_id] = entry

    (run_dir / MERGED).write_text(serialize_turtle(r.merged), encoding="utf-8")
    manifest = {
        "run_id": r.run_id,
        "case_id": r.case_id,
        "technique": r.technique.value,
        "mode": r.mode.value,
        "model_name": r.model_name,
        "cq_order": r.cq_order,
        "per_cq": per_cq,
        "merged": {"file": MERGED, "triples": len(r.merged.triples)},
        "timings": {k: round(v, 6) for k, v in sorted(r.timings.items())},
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if cfg is not None:
        manifest["config"] = cfg.model_dump(mode="json", exclude={"mock_replies"})
    _write_json(run_dir / MANIFEST, manifest)
    logger.info("Run %s written to %s", r.run_id, run_dir)
    return run_dir


def load_run(run_dir: Path) -> RunResult:
    manifest_path = run_dir / MANIFEST
    if not manifest_path.is_file():
        raise MissingFile(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    per_cq: Dict[str, CqOutcome] = {}
    for cq_id, entry in manifest["per_cq"].items():
        ontology: Optional[Ontology] = None
        if entry.get("status") == "ok":
            path = run_dir / entry["file"]
            if not path.is_file():
                raise MissingFile(path)
            ontology = parse_turtle(path.read_text(encoding="utf-8"))
        per_cq[cq_id] = CqOutcome(
            cq_id=cq_id,
            ontology=ontology,
            error_type=entry.get("error_type"),
            error=entry.get("error"),
            attempts=entry.get("attempts", 0),
            prompt_chars=entry.get("prompt_chars", 0),
        )
    merged_path = run_dir / manifest["merged"]["file"]
    if not merged_path.is_file():
        raise MissingFile(merged_path)
    return RunResult(
        run_id=manifest["run_id"],
        case_id=manifest["case_id"],
        technique=Technique(manifest["technique"]),
        mode=GenerationMode(manifest["mode"]),
        model_name=manifest["model_name"],
        cq_order=manifest["cq_order"],
        per_cq=per_cq,
        merged=parse_turtle(merged_path.read_text(encoding="utf-8")),
        timings=manifest.get("timings", {}),
    )


async def execute_run(
    case: Case,
    technique: Technique,
    mode: GenerationMode,
    cfg: Union[GenerationContext, ModelConfig],
    runs_dir: Path,
    *,
    run_id: Optional[str] = None,
    force: bool = False,
    base_namespace: Optional[str] = None,
) -> RunResult:
    """Generate into ``runs_dir/<run-id>``, logging to the run's ``log.txt``."""
    ctx = as_context(cfg)
    run_id = run_id or ctx.run_id or make_run_id(case.id, technique, mode, ctx.cfg.model_name)
    run_dir = prepare_output_dir(runs_dir / run_id, force)
    ctx = ctx.model_copy(update={"run_id": run_id, "transcripts_dir": run_dir / PROMPTS_DIR})

    handler = attach_run_log(run_dir / LOG_FILE)
    try:
        logger.info(
            "Run %s: case %s, %s, %s mode, model %s", run_id, case.id, technique.value, mode.value, ctx.cfg.model_name
        )
        if mode is GenerationMode.INDEPENDENT:
            result = await generate_independent(case, technique, ctx)
        else:
            result = await generate_incremental(case, technique, ctx)
        if base_namespace:
            result = normalize_namespaces(result, base_namespace)
        for failure in result.failures():
            logger.warning("CQ %s produced no ontology: %s", failure.cq_id, failure.error_type)
        save_run(result, run_dir, ctx.cfg)
    finally:
        detach_run_log(handler)
    return result


__all__ = ["execute_run", "load_run", "prepare_output_dir", "save_run"]
