"""Independent and incremental ontology generation over a case."""

import asyncio
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import httpx
from pydantic import BaseModel, ConfigDict, Field
from rdflib import URIRef

from app.core.config import ModelConfig
from app.core.errors import AuthError, OntodraftError
from app.core.text import slugify
from app.llm.gateway import LlmGateway, extract_ontology_text
from app.models.common import GenerationMode, Technique
from app.models.dataset import Case, CompetencyQuestion
from app.models.ontology import (
    Ontology,
    build_ontology,
    declared_terms,
    is_standard,
    merge,
    merge_all,
    parse_turtle,
    signature,
    split_iri,
)
from app.prompts.engine import OdpCatalog, Prompt, PromptEngine, build_memoryless_prompt, build_ontogenia_prompt

logger = logging.getLogger(__name__)


class CqOutcome(BaseModel):
    """Result of one LLM call: an ontology, or the reason there is none."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    cq_id: str
    ontology: Optional[Ontology] = None
    error_type: Optional[str] = None
    error: Optional[str] = None
    attempts: int = 0
    prompt_chars: int = 0
    latency: float = 0.0

    @property
    def ok(self) -> bool:
        return self.ontology is not None


class RunResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    run_id: str
    case_id: str
    technique: Technique
    mode: GenerationMode
    model_name: str
    cq_order: List[str]
    per_cq: Dict[str, CqOutcome]
    merged: Ontology
    prompts: Dict[str, Prompt] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)

    def successes(self) -> List[CqOutcome]:
        return [self.per_cq[cq] for cq in self.cq_order if cq in self.per_cq and self.per_cq[cq].ok]

    def failures(self) -> List[CqOutcome]:
        return [self.per_cq[cq] for cq in self.cq_order if cq in self.per_cq and not self.per_cq[cq].ok]


def make_run_id(case_id: str, technique: Technique, mode: GenerationMode, model_name: str) -> str:
    return slugify(f"{case_id}-{technique.value}-{mode.value}-{model_name}", fallback="run")


class GenerationContext(BaseModel):
    """Everything a run needs besides the case: model, templates and I/O hooks."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    cfg: ModelConfig
    engine: Optional[PromptEngine] = None
    odps: Optional[OdpCatalog] = None
    transport: Optional[httpx.AsyncBaseTransport] = None
    transcripts_dir: Optional[Path] = None
    run_id: Optional[str] = None

    def gateway(self) -> LlmGateway:
        return LlmGateway(self.cfg, transport=self.transport, transcripts_dir=self.transcripts_dir)


def as_context(cfg: Union[GenerationContext, ModelConfig]) -> GenerationContext:
    return cfg if isinstance(cfg, GenerationContext) else GenerationContext(cfg=cfg)


def _prompt(
    ctx: GenerationContext, technique: Technique, case: Case, cq: CompetencyQuestion, prior: Optional[Ontology]
) -> Prompt:
    if technique is Technique.MEMORYLESS:
        return build_memoryless_prompt(case.story, cq, engine=ctx.engine)
    return build_ontogenia_prompt(case.story, cq, odps=ctx.odps, prior=prior, engine=ctx.engine)


def _failure(prompt: Prompt, exc: Exception) -> CqOutcome:
    return CqOutcome(
        cq_id=prompt.cq_id,
        error_type=type(exc).__name__,
        error=str(exc),
        attempts=getattr(exc, "attempts", 0) or 0,
        prompt_chars=prompt.char_length,
    )


async def _call(gateway: LlmGateway, prompt: Prompt) -> CqOutcome:
    try:
        response = await gateway.complete(prompt)
        text = extract_ontology_text(response)
        ontology = parse_turtle(text, response.declared_prefixes)
    except AuthError:
        raise
    except OntodraftError as exc:
        logger.warning("CQ %s failed: %s: %s", prompt.cq_id, type(exc).__name__, exc)
        return _failure(prompt, exc)
    except Exception as exc:  # noqa: BLE001
        logger.exception("CQ %s failed unexpectedly", prompt.cq_id)
        return _failure(prompt, exc)
    return CqOutcome(
        cq_id=prompt.cq_id,
        ontology=ontology,
        attempts=response.attempt,
        prompt_chars=prompt.char_length,
        latency=response.latency,
    )


def _result(
    case: Case,
    technique: Technique,
    mode: GenerationMode,
    ctx: GenerationContext,
    outcomes: Dict[str, CqOutcome],
    merged: Ontology,
    prompts: Dict[str, Prompt],
    started: float,
) -> RunResult:
    timings = {f"cq:{cq}": outcome.latency for cq, outcome in outcomes.items()}
    timings["total"] = time.perf_counter() - started
    return RunResult(
        run_id=ctx.run_id or make_run_id(case.id, technique, mode, ctx.cfg.model_name),
        case_id=case.id,
        technique=technique,
        mode=mode,
        model_name=ctx.cfg.model_name,
        cq_order=[q.id for q in case.cqs],
        per_cq=outcomes,
        merged=merged,
        prompts=prompts,
        timings=timings,
    )


async def _fan_out(prompts: Dict[str, Prompt], ctx: GenerationContext) -> Dict[str, CqOutcome]:
    """Run every prompt concurrently; an abort cancels the calls still in flight."""
    async with ctx.gateway() as gateway:
        tasks = [asyncio.ensure_future(_call(gateway, p)) for p in prompts.values()]
        try:
            if tasks:
                await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
            finished = [task for task in tasks if task.done() and not task.cancelled()]
            errors = [task.exception() for task in finished if task.exception() is not None]
            if errors:
                raise errors[0]  # type: ignore[misc]
        finally:
            pending = [task for task in tasks if not task.done()]
            for task in pending:
                task.cancel()
            if pending:
                await asyncio.gather(*pending, return_exceptions=True)
                logger.warning("Cancelled %d pending call(s)", len(pending))
    return {task.result().cq_id: task.result() for task in tasks}


async def generate_independent(
    case: Case, technique: Technique, cfg: Union[GenerationContext, ModelConfig]
) -> RunResult:
    """One call per CQ with only (story, that CQ) in context; calls run concurrently."""
    ctx = as_context(cfg)
    started = time.perf_counter()
    prompts = {cq.id: _prompt(ctx, technique, case, cq, None) for cq in case.cqs}
    outcomes = await _fan_out(prompts, ctx)
    merged = merge_all(outcomes[q.id].ontology for q in case.cqs if outcomes[q.id].ok)
    logger.info(
        "Independent %s run on %s: %d/%d CQs produced an ontology",
        technique.value,
        case.id,
        sum(o.ok for o in outcomes.values()),
        len(outcomes),
    )
    return _result(case, technique, GenerationMode.INDEPENDENT, ctx, outcomes, merged, prompts, started)


async def generate_incremental(
    case: Case, technique: Technique, cfg: Union[GenerationContext, ModelConfig]
) -> RunResult:
    """A single ontology for the whole story.

    Memoryless merges independent per-CQ outputs at the end. Ontogenia runs
    strictly in order, feeding the ontology merged so far into each prompt; a
    failed CQ leaves that ontology unchanged.
    """
    ctx = as_context(cfg)
    started = time.perf_counter()
    if technique is Technique.MEMORYLESS:
        prompts = {cq.id: _prompt(ctx, technique, case, cq, None) for cq in case.cqs}
        outcomes = await _fan_out(prompts, ctx)
        merged = merge_all(outcomes[q.id].ontology for q in case.cqs if outcomes[q.id].ok)
        return _result(case, technique, GenerationMode.INCREMENTAL, ctx, outcomes, merged, prompts, started)

    sequential_outcomes, sequential_prompts, merged = await _ontogenia_sequence(case, ctx)
    logger.info(
        "Incremental Ontogenia run on %s: %d triples after %d CQs",
        case.id,
        len(merged.triples),
        len(sequential_outcomes),
    )
    return _result(
        case, technique, GenerationMode.INCREMENTAL, ctx, sequential_outcomes, merged, sequential_prompts, started
    )


async def _ontogenia_sequence(
    case: Case, ctx: GenerationContext
) -> Tuple[Dict[str, CqOutcome], Dict[str, Prompt], Ontology]:
    prior: Optional[Ontology] = None
    outcomes: Dict[str, CqOutcome] = {}
    prompts: Dict[str, Prompt] = {}
    async with ctx.gateway() as gateway:
        for cq in case.cqs:
            prompt = _prompt(ctx, Technique.ONTOGENIA, case, cq, prior)
            prompts[cq.id] = prompt
            outcome = await _call(gateway, prompt)
            outcomes[cq.id] = outcome
            if outcome.ok:
                prior = outcome.ontology if prior is None else merge(prior, outcome.ontology)
    return outcomes, prompts, prior if prior is not None else Ontology()


# -----------------------------
# Namespace normalization
# -----------------------------


def _term_namespaces(o: Ontology) -> Dict[URIRef, str]:
    """Namespaces of the ontology's own classes and properties; other IRIs are references."""
    headers = o.header_subjects()
    terms: Dict[URIRef, str] = {}
    for term in signature(o).all_terms() | declared_terms(o):
        if not is_standard(term) and term not in headers:
            namespace, local = split_iri(str(term))
            if local:
                terms[term] = namespace
    return terms


def normalize_namespaces(r: RunResult, base: str) -> RunResult:
    """Move terms from throwaway namespaces under ``base``, keeping local names.

    A namespace is throwaway when exactly one partial uses it and the prompt for
    that partial did not declare it. Identical local names collapse into one IRI.
    """
    if not base or base[-1] not in "/#":
        raise ValueError(f"base namespace must end with '/' or '#': {base!r}")

    partials = r.successes()
    usage: Dict[str, set] = {}
    for outcome in partials:
        for namespace in set(_term_namespaces(outcome.ontology).values()):
            usage.setdefault(namespace, set()).add(outcome.cq_id)

    per_cq = dict(r.per_cq)
    for outcome in partials:
        prompt = r.prompts.get(outcome.cq_id)
        declared = set(prompt.declared_prefixes.values()) if prompt else set()
        throwaway = {ns for ns, users in usage.items() if users == {outcome.cq_id} and ns not in declared}
        if not throwaway:
            continue
        renames = {
            term: URIRef(base + str(term)[len(namespace):])
            for term, namespace in _term_namespaces(outcome.ontology).items()
            if namespace in throwaway
        }
        triples = {tuple(renames.get(t, t) for t in triple) for triple in outcome.ontology.triples}
        prefixes = {p: (base if ns in throwaway else ns) for p, ns in outcome.ontology.prefixes.items()}
        rewritten = build_ontology(triples, prefixes, outcome.ontology.ontology_iri, detect_header=False)
        per_cq[outcome.cq_id] = outcome.model_copy(update={"ontology": rewritten})
        logger.debug("Normalized %d term(s) of %s under %s", len(renames), outcome.cq_id, base)

    ordered = [per_cq[cq].ontology for cq in r.cq_order if cq in per_cq and per_cq[cq].ok]
    return r.model_copy(update={"per_cq": per_cq, "merged": merge_all(ordered)})


__all__ = [
    "CqOutcome",
    "GenerationContext",
    "RunResult",
    "generate_incremental",
    "generate_independent",
    "make_run_id",
    "normalize_namespaces",
]
