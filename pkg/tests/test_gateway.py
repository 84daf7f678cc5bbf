"""Tests for the LLM gateway and Turtle extraction from replies."""

import json

import httpx
import pytest

from app.api.chat import CQ_HEADER
from app.core.errors import AuthError, EmptyOutput, NonOntologyOutput, TransportError
from app.llm.gateway import LlmGateway, RawResponse, complete, extract_ontology_text
from app.prompts.engine import build_memoryless_prompt
from tests.conftest import mock_config

COMPLETION = {"choices": [{"index": 0, "message": {"role": "assistant", "content": "ex:A a owl:Class ."}}]}


def reply(text: str, prefixes=None) -> RawResponse:
    return RawResponse(
        cq_id="cq1",
        text=text,
        prompt_chars=10,
        latency=0.0,
        attempt=1,
        declared_prefixes=prefixes or {},
    )


def scripted(statuses):
    """A MockTransport serving ``statuses`` in order, then completions."""
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        status = statuses[len(seen) - 1] if len(seen) <= len(statuses) else 200
        if status != 200:
            return httpx.Response(status, json={"error": {"message": "scripted"}})
        return httpx.Response(200, json=COMPLETION)

    return httpx.MockTransport(handler), seen


@pytest.fixture
def prompt(book_case):
    return build_memoryless_prompt(book_case.story, book_case.cqs[0])


class TestComplete:
    async def test_success(self, prompt):
        transport, seen = scripted([])
        response = await complete(prompt, mock_config("book", backend="http"), transport=transport)
        assert response.text == "ex:A a owl:Class ."
        assert response.attempt == 1
        assert response.cq_id == "cq1"
        assert response.prompt_chars == prompt.char_length
        assert seen[0].headers[CQ_HEADER] == "cq1"

    async def test_retries_rate_limits(self, prompt):
        transport, seen = scripted([429, 503])
        response = await complete(prompt, mock_config("book", backend="http", max_retries=3), transport=transport)
        assert response.attempt == 3
        assert len(seen) == 3

    async def test_retries_exhausted(self, prompt):
        transport, seen = scripted([500] * 10)
        with pytest.raises(TransportError) as exc:
            await complete(prompt, mock_config("book", backend="http", max_retries=2), transport=transport)
        assert exc.value.status == 500
        assert exc.value.attempts == 3
        assert len(seen) == 3

    async def test_client_error_is_not_retried(self, prompt):
        transport, seen = scripted([400])
        with pytest.raises(TransportError) as exc:
            await complete(prompt, mock_config("book", backend="http"), transport=transport)
        assert exc.value.status == 400
        assert len(seen) == 1

    async def test_auth_error(self, prompt):
        transport, seen = scripted([401])
        with pytest.raises(AuthError):
            await complete(prompt, mock_config("book", backend="http"), transport=transport)
        assert len(seen) == 1

    async def test_connection_errors_are_retried(self, prompt):
        calls = []

        def handler(request: httpx.Request) -> httpx.Response:
            calls.append(request)
            if len(calls) == 1:
                raise httpx.ConnectError("refused", request=request)
            return httpx.Response(200, json=COMPLETION)

        response = await complete(prompt, mock_config("book", backend="http"), transport=httpx.MockTransport(handler))
        assert response.attempt == 2

    async def test_malformed_payload(self, prompt):
        transport = httpx.MockTransport(lambda request: httpx.Response(200, json={"choices": []}))
        with pytest.raises(TransportError, match="malformed"):
            await complete(prompt, mock_config("book", backend="http"), transport=transport)

    async def test_bearer_token_from_env(self, prompt, monkeypatch):
        monkeypatch.setenv("ONTODRAFT_TEST_API_KEY", "s3cret")
        transport, seen = scripted([])
        await complete(prompt, mock_config("book", backend="http"), transport=transport)
        assert seen[0].headers["Authorization"] == "Bearer s3cret"

    async def test_transcript_is_written(self, prompt, tmp_path):
        transport, _ = scripted([])
        await complete(prompt, mock_config("book", backend="http"), transport=transport, transcripts_dir=tmp_path)
        transcript = json.loads((tmp_path / "cq1.json").read_text(encoding="utf-8"))
        assert transcript["request"]["messages"][0]["content"] == prompt.text
        assert transcript["response"] == {"status": 200, "content": "ex:A a owl:Class ."}
        assert "latency" not in transcript

    async def test_mock_backend_replies(self, prompt):
        response = await complete(prompt, mock_config("book"))
        assert "ex:hasAuthor a owl:ObjectProperty" in response.text

    async def test_mock_backend_status_script(self, library_case):
        cq2 = build_memoryless_prompt(library_case.story, library_case.cqs[1])
        response = await complete(cq2, mock_config("library"))
        assert response.attempt == 2


class TestPayload:
    def test_sampling_params(self, prompt):
        payload = LlmGateway(mock_config("book", temperature=0.2)).build_payload(prompt)
        assert payload["model"] == "mock-model"
        assert payload["temperature"] == 0.2
        assert payload["frequency_penalty"] == 0.0
        assert payload["presence_penalty"] == 0.0

    def test_sampling_params_omitted(self, prompt):
        payload = LlmGateway(mock_config("book", omit_sampling_params=True)).build_payload(prompt)
        assert set(payload) == {"model", "messages"}


class TestExtractOntologyText:
    def test_last_turtle_block_wins(self):
        text = "```turtle\n<http://a.org/X> a owl:Class .\n```\nand\n```ttl\n<http://a.org/Y> a owl:Class .\n```\n"
        assert extract_ontology_text(reply(text)) == "<http://a.org/Y> a owl:Class ."

    def test_labelled_block_preferred(self):
        text = "```turtle\n<http://a.org/X> a owl:Class .\n```\n```\nnot turtle at all\n```"
        assert extract_ontology_text(reply(text)) == "<http://a.org/X> a owl:Class ."

    def test_unlabelled_block(self):
        text = "Sure.\n```\n<http://a.org/X> a owl:Class .\n```"
        assert extract_ontology_text(reply(text)) == "<http://a.org/X> a owl:Class ."

    def test_whole_reply(self):
        assert extract_ontology_text(reply("<http://a.org/X> a owl:Class .\n")) == "<http://a.org/X> a owl:Class ."

    def test_prompt_prefixes_in_scope(self):
        text = "```turtle\nex:A a owl:Class .\n```"
        assert extract_ontology_text(reply(text, {"ex": "http://example.org/onto#"})) == "ex:A a owl:Class ."

    def test_empty(self):
        with pytest.raises(EmptyOutput):
            extract_ontology_text(reply("```turtle\n\n```"))

    def test_not_turtle(self):
        with pytest.raises(NonOntologyOutput) as exc:
            extract_ontology_text(reply("I cannot help with that request."))
        assert exc.value.parse_error.line >= 1
