"""Tests for the prompt engine and the Memoryless/Ontogenia prompt builders."""

import shutil

import pytest

from app.core.config import BUNDLED_TEMPLATES_DIR
from app.core.errors import TemplateError
from app.models.common import Technique
from app.models.ontology import merge_all
from app.prompts.engine import (
    OdpCatalog,
    PromptEngine,
    build_memoryless_prompt,
    build_ontogenia_prompt,
    context_reduction,
    default_engine,
    load_odp_catalog,
)
from tests.conftest import CANDIDATES, read_ttl


def copy_templates(tmp_path):
    target = tmp_path / "templates"
    shutil.copytree(BUNDLED_TEMPLATES_DIR, target)
    return target


class TestMemorylessPrompt:
    def test_sections_in_order(self, book_case):
        prompt = build_memoryless_prompt(book_case.story, book_case.cqs[0])
        assert prompt.technique is Technique.MEMORYLESS
        assert prompt.sections == ["persona", "turtle_primer", "story", "question", "pitfalls", "output_format"]
        assert prompt.char_length == len(prompt.text)

    def test_contains_story_and_question(self, book_case):
        prompt = build_memoryless_prompt(book_case.story, book_case.cqs[0])
        assert book_case.story.text in prompt.text
        assert book_case.cqs[0].text in prompt.text
        assert "{{" not in prompt.text and "{#" not in prompt.text

    def test_header_comments_are_not_rendered(self, book_case):
        for prompt in (
            build_memoryless_prompt(book_case.story, book_case.cqs[0]),
            build_ontogenia_prompt(book_case.story, book_case.cqs[0]),
        ):
            assert prompt.text.startswith("You are an")
            assert "reconstructed" not in prompt.text

    def test_only_its_own_question(self, theatre_case):
        for cq in theatre_case.cqs:
            text = build_memoryless_prompt(theatre_case.story, cq).text
            assert cq.text in text
            others = [q.text for q in theatre_case.cqs if q.id != cq.id]
            assert not any(other in text for other in others)

    def test_primer_prefixes_are_declared(self, book_case):
        prompt = build_memoryless_prompt(book_case.story, book_case.cqs[0])
        assert prompt.declared_prefixes["ex"] == "http://example.org/onto#"
        assert prompt.declared_prefixes["owl"] == "http://www.w3.org/2002/07/owl#"

    def test_rendering_is_deterministic(self, library_case):
        first = build_memoryless_prompt(library_case.story, library_case.cqs[1])
        second = build_memoryless_prompt(library_case.story, library_case.cqs[1])
        assert first == second


class TestOntogeniaPrompt:
    def test_without_prior(self, book_case):
        prompt = build_ontogenia_prompt(book_case.story, book_case.cqs[0])
        assert "prior" not in prompt.sections
        assert prompt.sections[:6] == [
            "guidelines",
            "comprehension_clarification",
            "preliminary_judgement",
            "critical_evaluation",
            "decision_confirmation",
            "confidence_assessment",
        ]
        assert prompt.sections[-1] == "output_format"

    def test_patterns_are_embedded(self, book_case):
        prompt = build_ontogenia_prompt(book_case.story, book_case.cqs[0])
        for name in default_engine().odps.names():
            assert f"Pattern: {name}" in prompt.text

    def test_empty_catalog(self, book_case):
        prompt = build_ontogenia_prompt(book_case.story, book_case.cqs[0], odps=OdpCatalog())
        assert "(none)" in prompt.text
        assert "Pattern:" not in prompt.text

    def test_prior_is_embedded(self, library_case):
        prior = merge_all(library_case.gold[cq].gold_module for cq in ("cq1", "cq2"))
        prompt = build_ontogenia_prompt(library_case.story, library_case.cqs[2], prior=prior)
        assert "prior" in prompt.sections
        assert "lib:holds" in prompt.text
        assert "lib:title" in prompt.text
        assert prompt.declared_prefixes["lib"] == "http://example.org/library#"

    def test_empty_prior_is_skipped(self, library_case):
        prompt = build_ontogenia_prompt(library_case.story, library_case.cqs[0], prior=merge_all([]))
        assert "prior" not in prompt.sections


class TestContextReduction:
    def test_positive_on_library(self, library_case):
        prior = library_case.gold["cq1"].gold_module
        assert context_reduction(library_case, 2, prior) > 0

    @pytest.mark.parametrize("k", [0, 1, 4])
    def test_k_out_of_range(self, library_case, k):
        with pytest.raises(ValueError):
            context_reduction(library_case, k, library_case.gold["cq1"].gold_module)

    def test_memoryless_always_shorter(self, theatre_case):
        prior = read_ttl(CANDIDATES / "theatre_prior.ttl")
        for k in range(2, len(theatre_case.cqs) + 1):
            cq = theatre_case.cqs[k - 1]
            memoryless = build_memoryless_prompt(theatre_case.story, cq)
            ontogenia = build_ontogenia_prompt(theatre_case.story, cq, prior=prior)
            assert memoryless.char_length < ontogenia.char_length

    def test_final_question_ratio(self, theatre_case):
        prior = read_ttl(CANDIDATES / "theatre_prior.ttl")
        ratio = context_reduction(theatre_case, len(theatre_case.cqs), prior)
        print(f"context reduction at CQ 15: {ratio:.3f}")
        assert 0 < ratio < 1


class TestTemplates:
    def test_missing_placeholder(self, tmp_path):
        root = copy_templates(tmp_path)
        (root / "memoryless" / "04_question.txt").write_text("Model the question.\n", encoding="utf-8")
        with pytest.raises(TemplateError, match="cq"):
            PromptEngine(root)

    def test_template_syntax_error(self, tmp_path):
        root = copy_templates(tmp_path)
        (root / "ontogenia" / "13_extra.txt").write_text("{% for x in %}\n", encoding="utf-8")
        with pytest.raises(TemplateError):
            PromptEngine(root)

    def test_custom_section_is_rendered(self, tmp_path, book_case):
        root = copy_templates(tmp_path)
        (root / "memoryless" / "07_signoff.txt").write_text("End of task {{ cq|length }}.\n", encoding="utf-8")
        prompt = build_memoryless_prompt(book_case.story, book_case.cqs[0], engine=PromptEngine(root))
        assert prompt.sections[-1] == "signoff"
        assert prompt.text.endswith(f"End of task {len(book_case.cqs[0].text)}.\n")

    def test_bundled_patterns(self):
        catalog = load_odp_catalog(BUNDLED_TEMPLATES_DIR / "odps")
        assert catalog.names() == ["AgentRole", "PartOf", "Situation"]

    def test_invalid_pattern(self, tmp_path):
        root = copy_templates(tmp_path)
        (root / "odps" / "broken.ttl").write_text("# name: Broken\nzz:X a owl:Class .\n", encoding="utf-8")
        with pytest.raises(TemplateError, match="broken.ttl"):
            load_odp_catalog(root / "odps")

    def test_duplicate_pattern_name(self, tmp_path):
        root = copy_templates(tmp_path)
        shutil.copy(root / "odps" / "partof.ttl", root / "odps" / "zz_partof_copy.ttl")
        with pytest.raises(TemplateError, match="duplicate"):
            load_odp_catalog(root / "odps")
