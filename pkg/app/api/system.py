from fastapi import APIRouter, Request

from app.models.common import Health

router = APIRouter()


@router.get("/health", response_model=Health, include_in_schema=False)
async def health(request: Request) -> Health:
    """Liveness check; also reports whether scripted replies are configured."""
    replies = getattr(request.app.state, "replies", None)
    scripted = replies is not None and replies.directory is not None
    return Health(status="ok", scripted=scripted)


__all__ = ["router"]
