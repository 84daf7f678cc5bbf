"""Chat-completions client with retries, plus Turtle extraction from model output."""

import asyncio
import json
import logging
import os
import re
import time
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import httpx
from pydantic import BaseModel, ConfigDict, Field
from tenacity import AsyncRetrying, RetryCallState, retry_if_exception_type, stop_after_attempt, wait_exponential

from app.api.chat import CQ_HEADER
from app.core.config import ModelConfig
from app.core.errors import AuthError, EmptyOutput, NonOntologyOutput, TransportError, TurtleSyntaxError
from app.models.ontology import parse_turtle
from app.prompts.engine import Prompt

logger = logging.getLogger(__name__)

MOCK_ENDPOINT = "http://mock.ontodraft/v1/chat/completions"
RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
MAX_BACKOFF_SECONDS = 60.0

_FENCE = re.compile(r"```[ \t]*([A-Za-z0-9_+\-]*)[^\n]*\n(.*?)```", re.DOTALL)


class RawResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    cq_id: str
    text: str
    prompt_chars: int
    latency: float
    attempt: int
    # Prefixes the prompt declared; model output may use them without redeclaring
    declared_prefixes: Dict[str, str] = Field(default_factory=dict)


class _Retryable(Exception):
    def __init__(self, message: str, status: Optional[int] = None) -> None:
        self.status = status
        super().__init__(message)


class LlmGateway:
    """Sends prompts to one endpoint; at most ``cfg.concurrency`` requests in flight.

    The ``mock`` backend is the in-process FastAPI app from :mod:`app.main`,
    reached over the same wire format as a real endpoint.
    """

    def __init__(
        self,
        cfg: ModelConfig,
        *,
        transport: Optional[httpx.AsyncBaseTransport] = None,
        transcripts_dir: Optional[Path] = None,
    ) -> None:
        self.cfg = cfg
        self.transcripts_dir = transcripts_dir
        if transport is None and cfg.is_mock:
            from app.main import create_mock_app

            transport = httpx.ASGITransport(app=create_mock_app(cfg.mock_replies))
        self.url = MOCK_ENDPOINT if cfg.is_mock else cfg.endpoint_url
        self._client = httpx.AsyncClient(transport=transport, timeout=cfg.timeout)
        self._semaphore = asyncio.Semaphore(cfg.concurrency)

    async def __aenter__(self) -> "LlmGateway":
        return self

    async def __aexit__(self, *exc_info: Any) -> None:
        await self.aclose()

    async def aclose(self) -> None:
        await self._client.aclose()

    def build_payload(self, prompt: Prompt) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt.text}],
        }
        if not self.cfg.omit_sampling_params:
            payload["temperature"] = self.cfg.temperature
            payload["frequency_penalty"] = self.cfg.frequency_penalty
            payload["presence_penalty"] = self.cfg.presence_penalty
        return payload

    def _headers(self, prompt: Prompt) -> Dict[str, str]:
        headers = {CQ_HEADER: prompt.cq_id}
        key = os.getenv(self.cfg.api_key_env, "").strip()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    async def _post(self, prompt: Prompt, payload: Dict[str, Any]) -> Tuple[int, str]:
        try:
            response = await self._client.post(self.url, json=payload, headers=self._headers(prompt))
        except httpx.HTTPError as exc:
            raise _Retryable(f"{type(exc).__name__}: {exc}") from exc
        status = response.status_code
        if status in (401, 403):
            raise AuthError(f"{self.url} rejected the credentials in ${self.cfg.api_key_env} (HTTP {status})")
        if status in RETRYABLE_STATUSES:
            raise _Retryable(f"HTTP {status}", status)
        if status >= 400:
            raise TransportError(f"HTTP {status}: {response.text[:200]}", status=status, attempts=1)
        try:
            content = response.json()["choices"][0]["message"].get("content") or ""
        except (ValueError, KeyError, IndexError, TypeError, AttributeError) as exc:
            raise TransportError(f"malformed completion payload from {self.url}", status=status) from exc
        return status, content

    def _log_retry(self, state: RetryCallState) -> None:
        exc = state.outcome.exception() if state.outcome else None
        logger.warning("Attempt %d failed (%s); retrying", state.attempt_number, exc)

    async def complete(self, prompt: Prompt) -> RawResponse:
        """First successful completion; 429/5xx and transport errors are retried."""
        payload = self.build_payload(prompt)
        attempts = 0
        started = time.perf_counter()
        retrying = AsyncRetrying(
            stop=stop_after_attempt(self.cfg.max_retries + 1),
            wait=wait_exponential(multiplier=self.cfg.backoff_base, max=MAX_BACKOFF_SECONDS),
            retry=retry_if_exception_type(_Retryable),
            before_sleep=self._log_retry,
            reraise=True,
        )
        try:
            async with self._semaphore:
                async for attempt in retrying:
                    with attempt:
                        attempts = attempt.retry_state.attempt_number
                        status, content = await self._post(prompt, payload)
        except _Retryable as exc:
            self._write_transcript(prompt, payload, attempts, {"status": exc.status, "error": str(exc)})
            raise TransportError(
                f"{self.url}: {exc} after {attempts} attempt(s)", status=exc.status, attempts=attempts
            ) from exc
        except (AuthError, TransportError) as exc:
            failure = {"status": getattr(exc, "status", None), "error": str(exc)}
            self._write_transcript(prompt, payload, attempts, failure)
            raise

        latency = time.perf_counter() - started
        self._write_transcript(prompt, payload, attempts, {"status": status, "content": content})
        logger.info("Completed %s in %.2fs (%d attempt(s), %d chars)", prompt.cq_id, latency, attempts, len(content))
        return RawResponse(
            cq_id=prompt.cq_id,
            text=content,
            prompt_chars=prompt.char_length,
            latency=latency,
            attempt=attempts,
            declared_prefixes=prompt.declared_prefixes,
        )

    def _write_transcript(
        self, prompt: Prompt, payload: Dict[str, Any], attempts: int, response: Dict[str, Any]
    ) -> None:
        if self.transcripts_dir is None:
            return
        self.transcripts_dir.mkdir(parents=True, exist_ok=True)
        transcript = {
            "cq_id": prompt.cq_id,
            "technique": prompt.technique.value,
            "sections": prompt.sections,
            "endpoint": self.url,
            "attempts": attempts,
            "request": payload,
            "response": response,
        }
        path = self.transcripts_dir / f"{prompt.cq_id}.json"
        path.write_text(json.dumps(transcript, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")


async def complete(
    p: Prompt,
    cfg: ModelConfig,
    *,
    transcripts_dir: Optional[Path] = None,
    transport: Optional[httpx.AsyncBaseTransport] = None,
) -> RawResponse:
    async with LlmGateway(cfg, transport=transport, transcripts_dir=transcripts_dir) as gateway:
        return await gateway.complete(p)


def extract_ontology_text(r: RawResponse) -> str:
    """The Turtle payload of a model reply.

    Takes the last fenced block labelled turtle/ttl, else the last fenced block,
    else the whole reply. The result must parse, with the prompt's prefixes in scope.
    """
    blocks = _FENCE.findall(r.text or "")
    labelled = [body for label, body in blocks if label.lower() in {"turtle", "ttl"}]
    if labelled:
        candidate = labelled[-1]
    elif blocks:
        candidate = blocks[-1][1]
    else:
        candidate = r.text or ""
    candidate = candidate.strip()
    if not candidate:
        raise EmptyOutput(f"no ontology content in reply for {r.cq_id}")
    try:
        parse_turtle(candidate, r.declared_prefixes)
    except TurtleSyntaxError as exc:
        raise NonOntologyOutput(exc) from exc
    return candidate


__all__ = ["LlmGateway", "RawResponse", "complete", "extract_ontology_text"]
