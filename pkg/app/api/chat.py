"""OpenAI-compatible ``POST /v1/chat/completions`` backed by scripted reply files."""

import hashlib
import threading
from pathlib import Path
from typing import Dict, List, Optional

from fastapi import APIRouter, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

CQ_HEADER = "X-Ontodraft-Cq-Id"

router = APIRouter(prefix="/v1")


class ChatMessage(BaseModel):
    role: str
    content: str = ""


class ChatCompletionRequest(BaseModel):
    model_config = ConfigDict(extra="allow")

    model: str
    messages: List[ChatMessage]


class ScriptedReplies:
    """Per-CQ reply files, with optional status scripts.

    ``<cq>.txt`` holds the reply content. ``<cq>.status`` lists HTTP statuses, one
    per line, served in order on successive calls before the reply succeeds.
    """

    def __init__(self, directory: Optional[Path]) -> None:
        self.directory = Path(directory) if directory else None
        # key: cq id -> calls served so far
        self._calls: Dict[str, int] = {}
        self._lock = threading.Lock()

    def _inc(self, cq_id: str) -> int:
        with self._lock:
            count = self._calls.get(cq_id, 0) + 1
            self._calls[cq_id] = count
        return count

    def calls(self, cq_id: str) -> int:
        with self._lock:
            return self._calls.get(cq_id, 0)

    def _file(self, cq_id: str, suffix: str) -> Optional[Path]:
        if self.directory is None or not cq_id or "/" in cq_id or cq_id.startswith("."):
            return None
        path = self.directory / f"{cq_id}{suffix}"
        return path if path.is_file() else None

    def status_for(self, cq_id: str) -> int:
        call = self._inc(cq_id)
        script = self._file(cq_id, ".status")
        if script is None:
            return 200
        statuses = [int(s) for s in script.read_text(encoding="utf-8").split() if s.strip()]
        return statuses[call - 1] if call <= len(statuses) else 200

    def reply_for(self, cq_id: str) -> str:
        path = self._file(cq_id, ".txt")
        return path.read_text(encoding="utf-8") if path else ""


def _completion(model: str, content: str, prompt: str) -> dict:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:24]
    return {
        "id": f"chatcmpl-{digest}",
        "object": "chat.completion",
        "created": 0,
        "model": model,
        "choices": [
            {
                "index": 0,
                "finish_reason": "stop",
                "message": {"role": "assistant", "content": content},
            }
        ],
        "usage": {"prompt_tokens": len(prompt.split()), "completion_tokens": len(content.split())},
    }


@router.post("/chat/completions")
async def chat_completions(
    body: ChatCompletionRequest,
    request: Request,
    cq_id: str = Header(default="", alias=CQ_HEADER),
    authorization: Optional[str] = Header(default=None),
) -> JSONResponse:
    replies: ScriptedReplies = request.app.state.replies
    expected_key: Optional[str] = request.app.state.api_key
    if expected_key is not None and authorization != f"Bearer {expected_key}":
        return JSONResponse({"error": {"message": "invalid api key"}}, status_code=401)

    status = replies.status_for(cq_id)
    if status != 200:
        return JSONResponse({"error": {"message": f"scripted status {status}"}}, status_code=status)
    prompt = "\n".join(m.content for m in body.messages)
    return JSONResponse(_completion(body.model, replies.reply_for(cq_id), prompt))


__all__ = ["CQ_HEADER", "ScriptedReplies", "router"]
