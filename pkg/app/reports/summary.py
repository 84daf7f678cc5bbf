import json
from pathlib import Path
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import MissingFile
from app.evaluation.coverage import SuperfluousReport
from app.evaluation.scoring import Scores


class RunSummary(BaseModel):
    """Headline results of evaluating one run (or one standalone Turtle file)."""

    model_config = ConfigDict(frozen=True)

    run_id: str
    case_id: str
    technique: str
    model_name: str
    mode: Optional[str] = None
    scores: Scores
    pitfall_counts: Dict[str, int] = Field(default_factory=dict)
    superfluous: SuperfluousReport = Field(default_factory=SuperfluousReport)

    @property
    def column(self) -> str:
        return f"{self.technique} ({self.model_name})"

    def sort_key(self) -> tuple:
        return (self.case_id, self.technique, self.model_name, self.run_id)


def save_summary(summary: RunSummary, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = summary.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_summary(path: Path) -> RunSummary:
    if not path.is_file():
        raise MissingFile(path)
    return RunSummary.model_validate_json(path.read_text(encoding="utf-8"))


__all__ = ["RunSummary", "load_summary", "save_summary"]
