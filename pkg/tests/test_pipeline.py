"""Tests for independent/incremental generation and namespace normalization."""

import asyncio

import httpx
import pytest
from rdflib import URIRef
from rdflib.namespace import RDFS

from app.api.chat import CQ_HEADER
from app.core.errors import AuthError
from app.models.common import GenerationMode, Technique
from app.models.ontology import parse_turtle, signature
from app.pipeline.generation import (
    CqOutcome,
    GenerationContext,
    RunResult,
    generate_incremental,
    generate_independent,
    make_run_id,
    normalize_namespaces,
)
from tests.conftest import mock_config

LIB = "http://example.org/library#"


def completion(content: str) -> dict:
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}


def ctx(case: str, **overrides) -> GenerationContext:
    return GenerationContext(cfg=mock_config(case, **overrides))


def prompt_texts(result: RunResult):
    return {cq: p.text for cq, p in result.prompts.items()}


class TestIndependent:
    async def test_one_outcome_per_cq(self, library_case):
        result = await generate_independent(library_case, Technique.MEMORYLESS, ctx("library"))
        assert result.cq_order == ["cq1", "cq2", "cq3"]
        assert set(result.per_cq) == {"cq1", "cq2", "cq3"}
        assert result.mode is GenerationMode.INDEPENDENT
        assert result.run_id == "library-memorylesscqbycq-independent-mock-model"

    async def test_failure_is_isolated(self, library_case):
        result = await generate_independent(library_case, Technique.MEMORYLESS, ctx("library"))
        assert [o.cq_id for o in result.successes()] == ["cq1", "cq2"]
        failed = result.per_cq["cq3"]
        assert failed.ontology is None
        assert failed.error_type == "NonOntologyOutput"
        assert result.per_cq["cq2"].attempts == 2

    async def test_merged_is_union(self, library_case):
        result = await generate_independent(library_case, Technique.MEMORYLESS, ctx("library"))
        sig = signature(result.merged)
        assert sig.classes == {URIRef(LIB + "Library"), URIRef(LIB + "Book")}
        assert sig.object_properties == {URIRef(LIB + "holds")}
        assert sig.data_properties == {URIRef(LIB + "bookTitle")}

    async def test_prompts_never_mention_other_questions(self, library_case):
        result = await generate_independent(library_case, Technique.MEMORYLESS, ctx("library"))
        texts = prompt_texts(result)
        for cq in library_case.cqs:
            others = [q.text for q in library_case.cqs if q.id != cq.id]
            assert cq.text in texts[cq.id]
            assert not any(other in texts[cq.id] for other in others)

    async def test_permutation_invariant(self, library_case):
        shuffled = library_case.model_copy(update={"cqs": list(reversed(library_case.cqs))})
        first = await generate_independent(library_case, Technique.MEMORYLESS, ctx("library"))
        second = await generate_independent(shuffled, Technique.MEMORYLESS, ctx("library"))
        assert first.merged.triples == second.merged.triples
        assert second.cq_order == ["cq3", "cq2", "cq1"]

    async def test_deterministic(self, library_case):
        first = await generate_independent(library_case, Technique.ONTOGENIA, ctx("library"))
        second = await generate_independent(library_case, Technique.ONTOGENIA, ctx("library"))
        assert first.merged.triples == second.merged.triples
        assert prompt_texts(first) == prompt_texts(second)

    async def test_ontogenia_independent_has_no_prior(self, library_case):
        result = await generate_independent(library_case, Technique.ONTOGENIA, ctx("library"))
        assert all("prior" not in p.sections for p in result.prompts.values())

    async def test_auth_error_aborts(self, library_case):
        transport = httpx.MockTransport(lambda request: httpx.Response(401, json={}))
        context = GenerationContext(cfg=mock_config("library", backend="http"), transport=transport)
        with pytest.raises(AuthError):
            await generate_independent(library_case, Technique.MEMORYLESS, context)

    async def test_auth_error_cancels_calls_in_flight(self, library_case):
        cancelled = []

        async def handler(request: httpx.Request) -> httpx.Response:
            cq_id = request.headers[CQ_HEADER]
            if cq_id == "cq1":
                await asyncio.sleep(0.05)
                return httpx.Response(401, json={})
            try:
                await asyncio.sleep(30)
            except asyncio.CancelledError:
                cancelled.append(cq_id)
                raise
            return httpx.Response(200, json=completion("<http://example.org/library#Book> a owl:Class ."))

        context = GenerationContext(cfg=mock_config("library", backend="http"), transport=httpx.MockTransport(handler))
        with pytest.raises(AuthError):
            await asyncio.wait_for(generate_independent(library_case, Technique.MEMORYLESS, context), timeout=10)
        assert sorted(cancelled) == ["cq2", "cq3"]

    async def test_unexpected_error_is_recorded_per_cq(self, library_case):
        def handler(request: httpx.Request) -> httpx.Response:
            if request.headers[CQ_HEADER] == "cq2":
                raise httpx.InvalidURL("scripted bad URL")
            return httpx.Response(200, json=completion("<http://example.org/library#Book> a owl:Class ."))

        context = GenerationContext(cfg=mock_config("library", backend="http"), transport=httpx.MockTransport(handler))
        result = await generate_independent(library_case, Technique.MEMORYLESS, context)
        assert [o.cq_id for o in result.successes()] == ["cq1", "cq3"]
        assert result.per_cq["cq2"].error_type == "InvalidURL"
        assert "scripted bad URL" in result.per_cq["cq2"].error
        assert signature(result.merged).classes == {URIRef(LIB + "Book")}


class TestIncremental:
    async def test_ontogenia_feeds_prior(self, library_case):
        result = await generate_incremental(library_case, Technique.ONTOGENIA, ctx("library"))
        prompts = result.prompts
        assert "prior" not in prompts["cq1"].sections
        assert "lib:holds" in prompts["cq2"].text
        assert "lib:holds" in prompts["cq3"].text
        assert "lib:bookTitle" in prompts["cq3"].text
        assert "lib:bookTitle" not in prompts["cq2"].text

    async def test_ontogenia_failed_cq_keeps_ontology(self, library_case):
        result = await generate_incremental(library_case, Technique.ONTOGENIA, ctx("library"))
        assert not result.per_cq["cq3"].ok
        assert result.merged.triples == (
            result.per_cq["cq1"].ontology.triples | result.per_cq["cq2"].ontology.triples
        )

    async def test_memoryless_merges_at_end(self, library_case):
        incremental = await generate_incremental(library_case, Technique.MEMORYLESS, ctx("library"))
        independent = await generate_independent(library_case, Technique.MEMORYLESS, ctx("library"))
        assert incremental.mode is GenerationMode.INCREMENTAL
        assert incremental.merged.triples == independent.merged.triples
        assert all("prior" not in p.sections for p in incremental.prompts.values())

    async def test_timings(self, book_case):
        result = await generate_incremental(book_case, Technique.ONTOGENIA, ctx("book"))
        assert set(result.timings) == {"cq:cq1", "total"}


def outcome(cq_id: str, text: str) -> CqOutcome:
    return CqOutcome(cq_id=cq_id, ontology=parse_turtle(text))


def run_of(*outcomes: CqOutcome) -> RunResult:
    return RunResult(
        run_id="r",
        case_id="c",
        technique=Technique.MEMORYLESS,
        mode=GenerationMode.INDEPENDENT,
        model_name="m",
        cq_order=[o.cq_id for o in outcomes],
        per_cq={o.cq_id: o for o in outcomes},
        merged=parse_turtle(""),
    )


class TestNormalizeNamespaces:
    def test_throwaway_namespaces_move_under_base(self):
        run = run_of(
            outcome("cq1", "@prefix t1: <http://tmp1.org/> . t1:Book a owl:Class ."),
            outcome("cq2", "@prefix t2: <http://tmp2.org/> . t2:Book a owl:Class . t2:title a owl:DatatypeProperty ."),
        )
        result = normalize_namespaces(run, "http://example.org/onto#")
        assert signature(result.merged).classes == {URIRef("http://example.org/onto#Book")}
        assert signature(result.merged).data_properties == {URIRef("http://example.org/onto#title")}

    def test_shared_namespace_is_kept(self):
        run = run_of(
            outcome("cq1", "<http://shared.org/A> a owl:Class ."),
            outcome("cq2", "<http://shared.org/B> a owl:Class ."),
        )
        result = normalize_namespaces(run, "http://example.org/onto#")
        assert signature(result.merged).classes == {URIRef("http://shared.org/A"), URIRef("http://shared.org/B")}

    def test_referenced_iris_are_not_terms(self):
        text = (
            "@prefix t1: <http://tmp1.org/> .\n"
            "t1:Book a owl:Class ; rdfs:seeAlso <https://en.wikipedia.org/wiki/Book> ."
        )
        result = normalize_namespaces(run_of(outcome("cq1", text)), "http://base.org/onto#")
        objects = {o for _s, p, o in result.merged.triples if p == RDFS.seeAlso}
        assert objects == {URIRef("https://en.wikipedia.org/wiki/Book")}
        assert signature(result.merged).classes == {URIRef("http://base.org/onto#Book")}

    def test_failed_outcomes_are_untouched(self):
        run = run_of(
            outcome("cq1", "<http://tmp.org/A> a owl:Class ."),
            CqOutcome(cq_id="cq2", error_type="EmptyOutput"),
        )
        result = normalize_namespaces(run, "http://example.org/onto/")
        assert not result.per_cq["cq2"].ok
        assert signature(result.merged).classes == {URIRef("http://example.org/onto/A")}

    def test_base_must_end_with_separator(self):
        with pytest.raises(ValueError):
            normalize_namespaces(run_of(), "http://example.org/onto")


def test_make_run_id():
    run_id = make_run_id("Book", Technique.ONTOGENIA, GenerationMode.INCREMENTAL, "gpt-4o")
    assert run_id == "book-ontogenia-incremental-gpt-4o"
