import os
from functools import lru_cache
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.core.errors import ConfigError

BUNDLED_TEMPLATES_DIR = Path(__file__).resolve().parents[1] / "templates"


def _env_flag(name: str, default: str) -> bool:
    return str(os.getenv(name, default)).strip().lower() in {"1", "true", "yes", "on"}


class Settings:
    """Process-wide settings read from environment variables.

    Per-run model settings live in :class:`ModelConfig` and come from a YAML file.
    """

    def __init__(self) -> None:
        self.runs_dir: Path = Path(os.getenv("ONTODRAFT_RUNS_DIR", "runs"))
        self.log_level: str = os.getenv("ONTODRAFT_LOG_LEVEL", "INFO").upper()
        templates = os.getenv("ONTODRAFT_TEMPLATES_DIR", "").strip()
        self.templates_dir: Path = Path(templates) if templates else BUNDLED_TEMPLATES_DIR
        self.online_p37: bool = _env_flag("ONTODRAFT_ONLINE_P37", "0")
        self.http_timeout: float = float(os.getenv("ONTODRAFT_HTTP_TIMEOUT", "10"))


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


class ModelConfig(BaseModel):
    """Chat-completion endpoint and sampling parameters for one generation run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    backend: str = "http"
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4-1106-preview"
    temperature: float = 0.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    # Reasoning-style models reject sampling parameters
    omit_sampling_params: bool = False
    max_retries: int = Field(default=3, ge=0)
    timeout: float = Field(default=120.0, gt=0)
    backoff_base: float = Field(default=1.0, ge=0)
    concurrency: int = Field(default=4, ge=1)
    api_key_env: str = "OPENAI_API_KEY"
    # Directory of scripted replies for the mock backend
    mock_replies: Optional[Path] = None

    @field_validator("backend")
    @classmethod
    def _known_backend(cls, value: str) -> str:
        value = value.strip().lower()
        if value not in {"http", "mock"}:
            raise ValueError("backend must be 'http' or 'mock'")
        return value

    @property
    def is_mock(self) -> bool:
        return self.backend == "mock"


def load_model_config(path: Path) -> ModelConfig:
    """Load a :class:`ModelConfig` from YAML; relative paths resolve against the file."""
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    replies = raw.get("mock_replies")
    if replies:
        replies_path = Path(replies)
        if not replies_path.is_absolute():
            raw["mock_replies"] = str((path.parent / replies_path).resolve())
    try:
        return ModelConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
