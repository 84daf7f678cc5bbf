"""Render Memoryless CQbyCQ and Ontogenia prompts from section templates.

Each technique is a directory of ``NN_<section>.txt`` Jinja2 templates rendered
in file-name order and joined by blank lines. Ontology Design Patterns live in
``odps/*.ttl``: leading ``# key: value`` comment lines carry the pattern's name
and description, the rest is a Turtle snippet.
"""

import logging
import re
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateSyntaxError, meta
from jinja2.exceptions import UndefinedError
from pydantic import BaseModel, ConfigDict, Field, computed_field

from app.core.config import get_settings
from app.core.errors import TemplateError, TurtleSyntaxError
from app.models.common import Technique
from app.models.dataset import Case, CompetencyQuestion, UserStory
from app.models.ontology import Ontology, declared_prefixes, parse_turtle, serialize_turtle

logger = logging.getLogger(__name__)

TECHNIQUE_DIRS: Dict[Technique, str] = {
    Technique.MEMORYLESS: "memoryless",
    Technique.ONTOGENIA: "ontogenia",
}
REQUIRED_PLACEHOLDERS: Dict[Technique, frozenset] = {
    Technique.MEMORYLESS: frozenset({"story", "cq"}),
    Technique.ONTOGENIA: frozenset({"story", "cq", "odps", "prior"}),
}
# Rendered only when a prior ontology is supplied
PRIOR_SECTION = "prior"

_SECTION_FILE = re.compile(r"^(\d+)_([a-z0-9_]+)\.txt$")
_META_LINE = re.compile(r"^#\s*([a-z_]+)\s*:\s*(.*)$")


class Prompt(BaseModel):
    model_config = ConfigDict(frozen=True)

    technique: Technique
    cq_id: str
    text: str
    sections: List[str]
    declared_prefixes: Dict[str, str] = Field(default_factory=dict)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def char_length(self) -> int:
        return len(self.text)


class OdpPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    description: str
    turtle: str


class OdpCatalog(BaseModel):
    model_config = ConfigDict(frozen=True)

    patterns: List[OdpPattern] = Field(default_factory=list)

    def names(self) -> List[str]:
        return [p.name for p in self.patterns]


def _read_pattern(path: Path) -> OdpPattern:
    meta_values: Dict[str, str] = {}
    body: List[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        match = _META_LINE.match(line)
        if match and not body:
            meta_values[match.group(1)] = match.group(2).strip()
        elif body or line.strip():
            body.append(line)
    turtle = "\n".join(body).strip()
    try:
        parse_turtle(turtle)
    except TurtleSyntaxError as exc:
        raise TemplateError(f"design pattern {path.name} is not valid Turtle: {exc}") from exc
    return OdpPattern(
        name=meta_values.get("name") or path.stem,
        description=meta_values.get("description", ""),
        turtle=turtle,
    )


def load_odp_catalog(directory: Path) -> OdpCatalog:
    if not directory.is_dir():
        raise TemplateError(f"design pattern directory not found: {directory}")
    patterns: List[OdpPattern] = []
    seen: Dict[str, Path] = {}
    for path in sorted(directory.glob("*.ttl")):
        pattern = _read_pattern(path)
        if pattern.name in seen:
            raise TemplateError(f"duplicate design pattern {pattern.name!r} in {seen[pattern.name]} and {path}")
        seen[pattern.name] = path
        patterns.append(pattern)
    return OdpCatalog(patterns=patterns)


class PromptEngine:
    """Loads and validates templates once; rendering is pure and thread-safe."""

    def __init__(self, templates_dir: Path) -> None:
        self.templates_dir = Path(templates_dir)
        self._env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            undefined=StrictUndefined,
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=False,
        )
        self._sections: Dict[Technique, List[Tuple[str, str]]] = {
            technique: self._load_sections(technique) for technique in TECHNIQUE_DIRS
        }
        self.odps = load_odp_catalog(self.templates_dir / "odps")
        logger.debug("Loaded prompt templates from %s", self.templates_dir)

    def _load_sections(self, technique: Technique) -> List[Tuple[str, str]]:
        folder = self.templates_dir / TECHNIQUE_DIRS[technique]
        if not folder.is_dir():
            raise TemplateError(f"template directory not found: {folder}")
        sections: List[Tuple[str, str]] = []
        referenced: set = set()
        for path in sorted(folder.iterdir()):
            match = _SECTION_FILE.match(path.name)
            if not match:
                continue
            name = f"{TECHNIQUE_DIRS[technique]}/{path.name}"
            source = path.read_text(encoding="utf-8")
            try:
                referenced |= meta.find_undeclared_variables(self._env.parse(source))
            except TemplateSyntaxError as exc:
                raise TemplateError(f"{name}:{exc.lineno}: {exc.message}") from exc
            sections.append((match.group(2), name))
        if not sections:
            raise TemplateError(f"no section templates in {folder}")
        missing = REQUIRED_PLACEHOLDERS[technique] - referenced
        if missing:
            raise TemplateError(
                f"{technique.value} templates never use placeholder(s): {', '.join(sorted(missing))}"
            )
        return sections

    def render(self, technique: Technique, cq_id: str, context: Dict[str, object]) -> Prompt:
        parts: List[str] = []
        labels: List[str] = []
        for label, name in self._sections[technique]:
            if label == PRIOR_SECTION and not context.get("prior"):
                continue
            try:
                rendered = self._env.get_template(name).render(**context).strip()
            except UndefinedError as exc:
                raise TemplateError(f"{name}: {exc.message}") from exc
            parts.append(rendered)
            labels.append(label)
        text = "\n\n".join(parts) + "\n"
        return Prompt(
            technique=technique,
            cq_id=cq_id,
            text=text,
            sections=labels,
            declared_prefixes=declared_prefixes(text),
        )


@lru_cache(maxsize=4)
def _engine_for(templates_dir: Path) -> PromptEngine:
    return PromptEngine(templates_dir)


def default_engine() -> PromptEngine:
    return _engine_for(get_settings().templates_dir)


def build_memoryless_prompt(
    story: UserStory, cq: CompetencyQuestion, engine: Optional[PromptEngine] = None
) -> Prompt:
    """One story and one CQ; never any prior output or other CQs."""
    engine = engine or default_engine()
    return engine.render(Technique.MEMORYLESS, cq.id, {"story": story.text, "cq": cq.text})


def build_ontogenia_prompt(
    story: UserStory,
    cq: CompetencyQuestion,
    odps: Optional[OdpCatalog] = None,
    prior: Optional[Ontology] = None,
    engine: Optional[PromptEngine] = None,
) -> Prompt:
    engine = engine or default_engine()
    catalog = engine.odps if odps is None else odps
    prior_text = serialize_turtle(prior).strip() if prior is not None and prior.triples else ""
    context = {
        "story": story.text,
        "cq": cq.text,
        "odps": catalog.patterns,
        "prior": prior_text,
    }
    return engine.render(Technique.ONTOGENIA, cq.id, context)


def context_reduction(
    case: Case,
    k: int,
    prior: Ontology,
    engine: Optional[PromptEngine] = None,
    odps: Optional[OdpCatalog] = None,
) -> float:
    """Relative prompt-size saving of Memoryless over Ontogenia for the k-th CQ (1-based)."""
    if k < 2 or k > len(case.cqs):
        raise ValueError(f"k must be between 2 and {len(case.cqs)}, got {k}")
    cq = case.cqs[k - 1]
    memoryless = build_memoryless_prompt(case.story, cq, engine=engine)
    ontogenia = build_ontogenia_prompt(case.story, cq, odps=odps, prior=prior, engine=engine)
    return 1 - memoryless.char_length / ontogenia.char_length


__all__ = [
    "OdpCatalog",
    "OdpPattern",
    "Prompt",
    "PromptEngine",
    "build_memoryless_prompt",
    "build_ontogenia_prompt",
    "context_reduction",
    "default_engine",
    "load_odp_catalog",
]
