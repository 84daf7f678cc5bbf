from pathlib import Path
from typing import Optional

from fastapi import FastAPI

from app.api.chat import ScriptedReplies
from app.api.chat import router as chat_router
from app.api.system import router as system_router


def create_mock_app(replies_dir: Optional[Path] = None, api_key: Optional[str] = None) -> FastAPI:
    """Deterministic chat-completions backend used by the ``mock`` model backend.

    When ``api_key`` is set, requests without the matching bearer token get 401.
    """
    application = FastAPI(title="ontodraft mock backend", docs_url=None, redoc_url=None)
    application.state.replies = ScriptedReplies(replies_dir)
    application.state.api_key = api_key

    application.include_router(system_router)
    application.include_router(chat_router)
    return application


__all__ = ["create_mock_app"]
