"""Evaluation cases: a user story, its competency questions and gold minimal modules.

Case directory layout::

    manifest.yaml     story file, ordered CQs with id/text/category, gold/query paths
    story.txt         UTF-8 narrative
    gold/<cq>.ttl     gold minimal module (Turtle)
    queries/<cq>.rq   validation SPARQL query
    aliases.tsv       optional: gold-iri <TAB> alias1,alias2
"""

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Set

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from rdflib import URIRef
from rdflib.paths import Path as PropertyPath
from rdflib.plugins.sparql import prepareQuery

from app.core.errors import (
    CaseError,
    DanglingReference,
    DuplicateCqId,
    MissingFile,
    QuerySyntaxError,
    TurtleSyntaxError,
    UnclassifiableTerm,
)
from app.core.text import normalize_name
from app.models.common import CqCategory, Diagnostic, RequiredTerm, TermKind
from app.models.ontology import Ontology, is_standard, parse_turtle, signature

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.yaml"
ALIASES_FILE = "aliases.tsv"


class UserStory(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    text: str


class CompetencyQuestion(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    text: str
    category: CqCategory


class GoldEntry(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    cq_id: str
    gold_module: Ontology
    validation_query: str
    required_terms: FrozenSet[RequiredTerm] = frozenset()

    def sorted_terms(self) -> List[RequiredTerm]:
        return sorted(self.required_terms, key=RequiredTerm.sort_key)


class Case(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: str
    story: UserStory
    cqs: List[CompetencyQuestion]
    gold: Dict[str, GoldEntry] = Field(default_factory=dict)
    # gold IRI -> acceptable normalized local names
    aliases: Dict[str, FrozenSet[str]] = Field(default_factory=dict)
    gold_less: FrozenSet[str] = frozenset()

    def cq(self, cq_id: str) -> CompetencyQuestion:
        for question in self.cqs:
            if question.id == cq_id:
                return question
        raise KeyError(cq_id)

    @property
    def categories(self) -> Dict[str, CqCategory]:
        return {q.id: q.category for q in self.cqs}


# -----------------------------
# Manifest schema
# -----------------------------


class _ManifestCq(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    text: str = ""
    category: CqCategory
    gold: Optional[str] = None
    query: Optional[str] = None
    gold_less: bool = False

    @field_validator("id")
    @classmethod
    def _strip(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("cq id must not be empty")
        return value


class _Manifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: Optional[str] = None
    story_id: Optional[str] = None
    story: str = "story.txt"
    cqs: List[_ManifestCq]


def _read_text(path: Path) -> str:
    if not path.is_file():
        raise MissingFile(path)
    return path.read_text(encoding="utf-8-sig")


def _read_manifest(root: Path) -> _Manifest:
    raw_text = _read_text(root / MANIFEST_FILE)
    try:
        raw = yaml.safe_load(raw_text) or {}
    except yaml.YAMLError as exc:
        raise CaseError(f"invalid YAML in {root / MANIFEST_FILE}: {exc}") from exc
    try:
        return _Manifest.model_validate(raw)
    except ValidationError as exc:
        raise CaseError(f"invalid manifest {root / MANIFEST_FILE}: {exc}") from exc


# -----------------------------
# Loading
# -----------------------------


def load_case(path: Path) -> Case:
    """Load, parse and resolve a case directory."""
    root = Path(path)
    if not root.is_dir():
        raise MissingFile(root)
    manifest = _read_manifest(root)

    seen: Set[str] = set()
    for item in manifest.cqs:
        if item.id in seen:
            raise DuplicateCqId(f"duplicate cq id in manifest: {item.id}")
        seen.add(item.id)

    story = UserStory(
        id=manifest.story_id or root.name,
        text=_read_text(root / manifest.story).strip(),
    )

    cqs: List[CompetencyQuestion] = []
    gold: Dict[str, GoldEntry] = {}
    gold_less: Set[str] = set()
    for item in manifest.cqs:
        cqs.append(CompetencyQuestion(id=item.id, text=item.text.strip(), category=item.category))
        if item.gold_less:
            gold_less.add(item.id)
            continue
        if (item.gold is None) != (item.query is None):
            raise DanglingReference(
                f"cq {item.id} declares only one of gold/query; declare both or mark it gold_less"
            )
        gold_path = root / (item.gold or f"gold/{item.id}.ttl")
        query_path = root / (item.query or f"queries/{item.id}.rq")
        gold_text = _read_text(gold_path)
        query_text = _read_text(query_path)
        try:
            module = parse_turtle(gold_text)
        except TurtleSyntaxError:
            logger.error("Gold module %s does not parse", gold_path)
            raise
        gold[item.id] = GoldEntry(
            cq_id=item.id,
            gold_module=module,
            validation_query=query_text,
            required_terms=extract_required_terms(query_text, module),
        )

    prefixes: Dict[str, str] = {}
    for entry in gold.values():
        prefixes.update(entry.gold_module.prefixes)
    aliases = load_aliases(root / ALIASES_FILE, prefixes)

    case = Case(
        id=manifest.id or root.name,
        story=story,
        cqs=cqs,
        gold=gold,
        aliases=aliases,
        gold_less=frozenset(gold_less),
    )
    logger.info(
        "Loaded case %s: %d CQs, %d gold entries, %d aliases",
        case.id,
        len(case.cqs),
        len(case.gold),
        len(case.aliases),
    )
    return case


def _resolve(token: str, prefixes: Mapping) -> Optional[str]:
    token = token.strip()
    if token.startswith("<") and token.endswith(">"):
        return token[1:-1]
    if "://" in token:
        return token
    prefix, sep, local = token.partition(":")
    if sep and prefix in prefixes:
        return prefixes[prefix] + local
    return None


def load_aliases(path: Path, prefixes: Mapping) -> Dict[str, FrozenSet[str]]:
    """Read an optional alias table; names are stored normalized."""
    if not path.is_file():
        return {}
    aliases: Dict[str, Set[str]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8-sig").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        iri_token, _, names = line.partition("\t")
        iri = _resolve(iri_token, prefixes)
        if iri is None:
            raise CaseError(f"{path}:{lineno}: cannot resolve IRI {iri_token.strip()!r}")
        normalized = {normalize_name(n) for n in names.split(",") if n.strip()}
        aliases.setdefault(iri, set()).update(normalized)
    return {iri: frozenset(names) for iri, names in aliases.items()}


# -----------------------------
# Required terms
# -----------------------------


def _collect_iris(node: Any, found: Set[URIRef]) -> None:
    if isinstance(node, URIRef):
        found.add(node)
    elif isinstance(node, PropertyPath):
        children = getattr(node, "args", None) or [getattr(node, "path", None)]
        for child in children:
            _collect_iris(child, found)
    elif isinstance(node, Mapping):
        for value in node.values():
            _collect_iris(value, found)
    elif isinstance(node, (list, tuple, set, frozenset)):
        for value in node:
            _collect_iris(value, found)


def extract_required_terms(query: str, gold: Ontology) -> FrozenSet[RequiredTerm]:
    """Named terms a validation query uses, classified by the gold module's signature.

    Triple patterns and FILTER/BIND expressions are walked syntactically;
    standard-vocabulary IRIs (rdf:type, xsd datatypes, ...) are skipped.
    """
    try:
        prepared = prepareQuery(query, initNs=dict(gold.prefixes))
    except Exception as exc:  # noqa: BLE001
        raise QuerySyntaxError(f"invalid validation query: {exc}") from exc

    found: Set[URIRef] = set()
    _collect_iris(prepared.algebra, found)

    gold_signature = signature(gold)
    terms: Set[RequiredTerm] = set()
    for iri in sorted(found, key=str):
        kinds = gold_signature.kinds_of(iri)
        if kinds:
            terms.add(RequiredTerm(iri=str(iri), kind=kinds[0]))
        elif not is_standard(iri):
            raise UnclassifiableTerm(str(iri))
    return frozenset(terms)


# -----------------------------
# Validation
# -----------------------------

_PLURALS = {
    TermKind.CLASS: ("class", "classes"),
    TermKind.OBJECT_PROPERTY: ("object property", "object properties"),
    TermKind.DATA_PROPERTY: ("data property", "data properties"),
}


def _count(n: int, kind: TermKind) -> str:
    singular, plural = _PLURALS[kind]
    return f"{n} superfluous {singular if n == 1 else plural}"


def validate_case(c: Case) -> List[Diagnostic]:
    """Check a case's invariants and the minimality of every gold module."""
    diagnostics: List[Diagnostic] = []
    if not c.story.text.strip():
        diagnostics.append(Diagnostic(code="EmptyStory", message="story text is empty", subject=c.story.id))

    cq_ids = [q.id for q in c.cqs]
    for question in c.cqs:
        if not question.text.strip():
            diagnostics.append(
                Diagnostic(code="EmptyQuestion", message="competency question has no text", subject=question.id)
            )
        if question.id not in c.gold and question.id not in c.gold_less:
            diagnostics.append(
                Diagnostic(code="MissingGold", message="no gold entry and not marked gold_less", subject=question.id)
            )
    for cq_id in sorted(set(c.gold) - set(cq_ids)):
        diagnostics.append(Diagnostic(code="DanglingGold", message="gold entry for unknown cq", subject=cq_id))

    gold_terms: Set[str] = set()
    for cq_id in [q for q in cq_ids if q in c.gold]:
        entry = c.gold[cq_id]
        module_signature = signature(entry.gold_module)
        gold_terms.update(str(t) for t in module_signature.all_terms())
        diagnostics.extend(entry.gold_module.diagnostics)

        if not entry.required_terms:
            diagnostics.append(
                Diagnostic(code="NoRequiredTerms", message="validation query uses no gold terms", subject=cq_id)
            )
        for term in entry.sorted_terms():
            if not module_signature.has(term.iri, term.kind):
                diagnostics.append(
                    Diagnostic(
                        code="RequiredTermMismatch",
                        message=f"{term.iri} is not a {term.kind.label} of the gold module",
                        subject=cq_id,
                    )
                )

        extra = []
        for kind in TermKind:
            required = {t.iri for t in entry.required_terms if t.kind is kind}
            superfluous = {str(t) for t in module_signature.terms(kind)} - required
            if superfluous:
                extra.append(_count(len(superfluous), kind))
        if extra:
            diagnostics.append(
                Diagnostic(code="GoldNotMinimal", message="gold not minimal: " + ", ".join(extra), subject=cq_id)
            )

    for iri in sorted(set(c.aliases) - gold_terms):
        message = "alias for a term outside every gold module"
        diagnostics.append(Diagnostic(code="DanglingAlias", message=message, subject=iri))
    return diagnostics


__all__ = [
    "Case",
    "CompetencyQuestion",
    "GoldEntry",
    "UserStory",
    "extract_required_terms",
    "load_aliases",
    "load_case",
    "validate_case",
]
