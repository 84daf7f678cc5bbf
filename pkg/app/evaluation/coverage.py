"""Signature-level CQ verification and superfluous-element analysis."""

import logging
from collections import Counter
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set

from pydantic import BaseModel, ConfigDict, Field, computed_field
from rdflib import BNode, URIRef

from app.core.text import normalize_name
from app.models.common import Diagnostic, RequiredTerm, TermKind
from app.models.dataset import GoldEntry
from app.models.ontology import Ontology, build_ontology, local_name, signature

logger = logging.getLogger(__name__)


class MatchMethod(str, Enum):
    EXACT = "exact"
    NORMALIZED = "normalized"
    ALIAS = "alias"


class VerdictStatus(str, Enum):
    MODELLED = "Modelled"
    MINOR_ISSUE = "MinorIssue"
    NOT_MODELLED = "NotModelled"


class TermMatch(BaseModel):
    model_config = ConfigDict(frozen=True)

    required: RequiredTerm
    matched: str
    method: MatchMethod


class CoverageReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    cq_id: str
    matches: List[TermMatch] = Field(default_factory=list)
    missing: List[RequiredTerm] = Field(default_factory=list)
    diagnostics: List[Diagnostic] = Field(default_factory=list)

    def matched_terms(self) -> Set[str]:
        return {m.matched for m in self.matches}


class CqVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    cq_id: str
    status: VerdictStatus
    missing_count: int = 0
    missing_kinds: List[TermKind] = Field(default_factory=list)


class KindTally(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: TermKind
    superfluous: List[str] = Field(default_factory=list)
    total: int = 0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def count(self) -> int:
        return len(self.superfluous)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def rate(self) -> Optional[float]:
        """Superfluous share of the kind; ``None`` when the candidate has none of it."""
        return self.count / self.total if self.total else None


class SuperfluousReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    classes: KindTally = Field(default_factory=lambda: KindTally(kind=TermKind.CLASS))
    object_properties: KindTally = Field(default_factory=lambda: KindTally(kind=TermKind.OBJECT_PROPERTY))
    data_properties: KindTally = Field(default_factory=lambda: KindTally(kind=TermKind.DATA_PROPERTY))

    def tally(self, kind: TermKind) -> KindTally:
        if kind is TermKind.CLASS:
            return self.classes
        if kind is TermKind.OBJECT_PROPERTY:
            return self.object_properties
        return self.data_properties

    def tallies(self) -> List[KindTally]:
        return [self.classes, self.object_properties, self.data_properties]

    def all_superfluous(self) -> List[str]:
        return [iri for tally in self.tallies() for iri in tally.superfluous]


# -----------------------------
# Coverage and classification
# -----------------------------


def _match(
    term: RequiredTerm, candidates: List[URIRef], aliases: Mapping[str, FrozenSet[str]]
) -> Optional[TermMatch]:
    if URIRef(term.iri) in candidates:
        return TermMatch(required=term, matched=term.iri, method=MatchMethod.EXACT)
    wanted = normalize_name(local_name(term.iri))
    for candidate in candidates:
        if normalize_name(local_name(str(candidate))) == wanted:
            return TermMatch(required=term, matched=str(candidate), method=MatchMethod.NORMALIZED)
    accepted = aliases.get(term.iri, frozenset())
    for candidate in candidates:
        if normalize_name(local_name(str(candidate))) in accepted:
            return TermMatch(required=term, matched=str(candidate), method=MatchMethod.ALIAS)
    return None


def coverage(
    candidate: Ontology, entry: GoldEntry, aliases: Optional[Mapping[str, FrozenSet[str]]] = None
) -> CoverageReport:
    """Match each required term against the candidate's signature, kind for kind.

    Rules are tried in order: exact IRI, normalized local name, alias table.
    """
    candidate_signature = signature(candidate)
    matches: List[TermMatch] = []
    missing: List[RequiredTerm] = []
    for term in entry.sorted_terms():
        candidates = sorted(candidate_signature.terms(term.kind), key=str)
        match = _match(term, candidates, aliases or {})
        if match is None:
            missing.append(term)
        else:
            matches.append(match)

    diagnostics = [
        Diagnostic(
            code="DuplicateBinding",
            message=f"candidate term satisfies {count} required terms",
            subject=iri,
        )
        for iri, count in sorted(Counter(m.matched for m in matches).items())
        if count > 1
    ]
    return CoverageReport(cq_id=entry.cq_id, matches=matches, missing=missing, diagnostics=diagnostics)


def classify(cr: CoverageReport) -> CqVerdict:
    """Modelled when nothing is missing; a minor issue when only one property is."""
    kinds = [term.kind for term in cr.missing]
    if not kinds:
        status = VerdictStatus.MODELLED
    elif len(kinds) == 1 and kinds[0].is_property:
        status = VerdictStatus.MINOR_ISSUE
    else:
        status = VerdictStatus.NOT_MODELLED
    return CqVerdict(cq_id=cr.cq_id, status=status, missing_count=len(kinds), missing_kinds=kinds)


# -----------------------------
# Structural analysis
# -----------------------------


def superfluous(candidate: Ontology, used: Iterable[str]) -> SuperfluousReport:
    """Signature terms no validation query of the story needs."""
    used_terms = {URIRef(str(u)) for u in used}
    candidate_signature = signature(candidate)
    tallies: Dict[str, KindTally] = {}
    for kind, field in (
        (TermKind.CLASS, "classes"),
        (TermKind.OBJECT_PROPERTY, "object_properties"),
        (TermKind.DATA_PROPERTY, "data_properties"),
    ):
        terms = candidate_signature.terms(kind)
        tallies[field] = KindTally(
            kind=kind,
            superfluous=sorted(str(t) for t in terms - used_terms),
            total=len(terms),
        )
    return SuperfluousReport(**tallies)


def minimal_module(candidate: Ontology, cr: CoverageReport) -> Ontology:
    """The candidate without the terms one CQ does not need.

    Triples mentioning a removed term go, and so does every blank-node structure
    (restriction, list, reification node) that loses part of its description.
    """
    keep = {URIRef(iri) for iri in cr.matched_terms()}
    removed = signature(candidate).all_terms() - keep
    dropped = {t for t in candidate.triples if any(term in removed for term in t)}
    kept = candidate.triples - dropped
    while True:
        # a blank node goes when it loses an outgoing triple or its last reference
        tainted = {s for s, _p, _o in dropped if isinstance(s, BNode)}
        referenced = {o for _s, _p, o in kept if isinstance(o, BNode)}
        tainted |= {o for _s, _p, o in dropped if isinstance(o, BNode) and o not in referenced}
        newly = {t for t in kept if t[0] in tainted or t[2] in tainted}
        if not newly:
            break
        dropped |= newly
        kept -= newly
    return build_ontology(kept, candidate.prefixes, candidate.ontology_iri, detect_header=False)


__all__ = [
    "CoverageReport",
    "CqVerdict",
    "KindTally",
    "MatchMethod",
    "SuperfluousReport",
    "TermMatch",
    "VerdictStatus",
    "classify",
    "coverage",
    "minimal_module",
    "superfluous",
]
