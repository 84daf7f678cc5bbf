"""Structural detectors for six critical ontology pitfalls.

Each detector restates one pitfall as a decidable condition over the triple set:

P05  wrong inverse: p owl:inverseOf q, all four domains/ranges single named
     classes, and domain(p) != range(q) or range(p) != domain(q).
P06  subclass cycle: a strongly connected component of the named subclass graph
     with two or more classes, or a class that is its own subclass.
P19  multiple domains or ranges: more than one distinct rdfs:domain object, or
     more than one distinct rdfs:range object, on the same property.
P29  wrong transitive: an owl:TransitiveProperty with single named domain D and
     range R where D != R and neither is a (transitive) subclass of the other.
P37  ontology not available: no owl:Ontology header; with the online check, also
     a HEAD on the ontology IRI that answers outside 2xx/3xx.
P39  ambiguous namespace: no usable ontology IRI, or the majority namespace of
     declared terms is not the ontology IRI's namespace.

Missing evidence (undeclared domain, blank-node range) keeps P05 and P29 silent.
"""

import logging
from collections import Counter
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import httpx
import networkx as nx
from pydantic import BaseModel, ConfigDict
from rdflib import URIRef
from rdflib.namespace import OWL, RDF, RDFS

from app.core.config import get_settings
from app.models.ontology import Ontology, declared_terms, is_standard, split_iri, subclass_graph

logger = logging.getLogger(__name__)


class PitfallCode(str, Enum):
    P05 = "P05"
    P06 = "P06"
    P19 = "P19"
    P29 = "P29"
    P37 = "P37"
    P39 = "P39"

    @property
    def label(self) -> str:
        return PITFALL_TITLES[self]


PITFALL_TITLES: Dict[PitfallCode, str] = {
    PitfallCode.P05: "Defining wrong inverse relationships",
    PitfallCode.P06: "Including cycles in a class hierarchy",
    PitfallCode.P19: "Defining multiple domains or ranges in properties",
    PitfallCode.P29: "Defining wrong transitive relationships",
    PitfallCode.P37: "Ontology not available",
    PitfallCode.P39: "Ambiguous namespace",
}


class PitfallFinding(BaseModel):
    model_config = ConfigDict(frozen=True)

    code: PitfallCode
    subjects: List[str]
    explanation: str

    def sort_key(self) -> tuple:
        return (self.code.value, self.subjects)


def _single_named(o: Ontology, subject: Any, predicate: Any) -> Optional[URIRef]:
    values = o.objects(subject, predicate)
    if len(values) != 1:
        return None
    (value,) = values
    return value if isinstance(value, URIRef) else None


def detect_p05(o: Ontology) -> List[PitfallFinding]:
    findings: List[PitfallFinding] = []
    seen = set()
    for p, q in sorted(o.pairs(OWL.inverseOf), key=lambda pair: (str(pair[0]), str(pair[1]))):
        if not (isinstance(p, URIRef) and isinstance(q, URIRef)):
            continue
        key = tuple(sorted((str(p), str(q))))
        if key in seen:
            continue
        seen.add(key)
        dp, rp = _single_named(o, p, RDFS.domain), _single_named(o, p, RDFS.range)
        dq, rq = _single_named(o, q, RDFS.domain), _single_named(o, q, RDFS.range)
        if None in (dp, rp, dq, rq):
            continue
        if dp != rq or rp != dq:
            findings.append(
                PitfallFinding(
                    code=PitfallCode.P05,
                    subjects=list(key),
                    explanation=(
                        f"{p} ({dp} -> {rp}) is declared inverse of {q} ({dq} -> {rq}), "
                        "but domain and range are not swapped"
                    ),
                )
            )
    return findings


def detect_p06(o: Ontology) -> List[PitfallFinding]:
    graph = subclass_graph(o)
    cycles = []
    for component in nx.strongly_connected_components(graph):
        if len(component) > 1:
            cycles.append(sorted(str(n) for n in component))
        else:
            (node,) = component
            if graph.has_edge(node, node):
                cycles.append([str(node)])
    return [
        PitfallFinding(
            code=PitfallCode.P06,
            subjects=members,
            explanation=f"subclass cycle through {len(members)} class(es)",
        )
        for members in sorted(cycles)
    ]


def detect_p19(o: Ontology) -> List[PitfallFinding]:
    properties = {s for s, _ in o.pairs(RDFS.domain) | o.pairs(RDFS.range) if isinstance(s, URIRef)}
    findings: List[PitfallFinding] = []
    for prop in sorted(properties, key=str):
        notes = []
        domains = o.objects(prop, RDFS.domain)
        ranges = o.objects(prop, RDFS.range)
        if len(domains) > 1:
            notes.append(f"{len(domains)} domains")
        if len(ranges) > 1:
            notes.append(f"{len(ranges)} ranges")
        if notes:
            findings.append(
                PitfallFinding(
                    code=PitfallCode.P19,
                    subjects=[str(prop)],
                    explanation=f"{' and '.join(notes)} are read as an intersection",
                )
            )
    return findings


def detect_p29(o: Ontology) -> List[PitfallFinding]:
    graph = subclass_graph(o)
    findings: List[PitfallFinding] = []
    for prop in sorted(o.subjects(RDF.type, OWL.TransitiveProperty), key=str):
        if not isinstance(prop, URIRef):
            continue
        domain, range_ = _single_named(o, prop, RDFS.domain), _single_named(o, prop, RDFS.range)
        if domain is None or range_ is None or domain == range_:
            continue
        graph.add_nodes_from([domain, range_])
        if nx.has_path(graph, domain, range_) or nx.has_path(graph, range_, domain):
            continue
        findings.append(
            PitfallFinding(
                code=PitfallCode.P29,
                subjects=[str(prop)],
                explanation=f"transitive property links unrelated classes {domain} and {range_}",
            )
        )
    return findings


def _head_status(iri: str, transport: Optional[httpx.BaseTransport], timeout: float) -> Optional[int]:
    try:
        with httpx.Client(transport=transport, timeout=timeout, follow_redirects=False) as client:
            return client.head(iri).status_code
    except httpx.HTTPError as exc:
        logger.warning("P37 not checked for %s: %s", iri, exc)
        return None


def detect_p37(
    o: Ontology,
    *,
    online: bool = False,
    transport: Optional[httpx.BaseTransport] = None,
    timeout: Optional[float] = None,
) -> List[PitfallFinding]:
    if not o.header_subjects():
        return [PitfallFinding(code=PitfallCode.P37, subjects=[], explanation="no owl:Ontology header")]
    if not online or o.ontology_iri is None:
        return []
    iri = str(o.ontology_iri)
    status = _head_status(iri, transport, timeout if timeout is not None else get_settings().http_timeout)
    if status is None or 200 <= status < 400:
        return []
    return [
        PitfallFinding(
            code=PitfallCode.P37,
            subjects=[iri],
            explanation=f"ontology IRI does not dereference (HTTP {status})",
        )
    ]


def _namespace_variants(iri: str) -> set:
    stem = iri.rstrip("#/")
    return {iri, stem + "#", stem + "/"}


def detect_p39(o: Ontology) -> List[PitfallFinding]:
    if o.ontology_iri is None:
        return [
            PitfallFinding(
                code=PitfallCode.P39,
                subjects=[],
                explanation="no single ontology IRI declares the namespace",
            )
        ]
    counts = Counter(split_iri(str(t))[0] for t in declared_terms(o) if not is_standard(t))
    if not counts:
        return []
    majority, count = min(counts.items(), key=lambda item: (-item[1], item[0]))
    if majority in _namespace_variants(str(o.ontology_iri)):
        return []
    return [
        PitfallFinding(
            code=PitfallCode.P39,
            subjects=[str(o.ontology_iri)],
            explanation=(
                f"{count} of {sum(counts.values())} declared terms use {majority}, "
                f"not the ontology IRI's namespace"
            ),
        )
    ]


DETECTORS: Dict[PitfallCode, Callable[[Ontology], List[PitfallFinding]]] = {
    PitfallCode.P05: detect_p05,
    PitfallCode.P06: detect_p06,
    PitfallCode.P19: detect_p19,
    PitfallCode.P29: detect_p29,
    PitfallCode.P37: detect_p37,
    PitfallCode.P39: detect_p39,
}


def scan(
    o: Ontology,
    *,
    online: bool = False,
    transport: Optional[httpx.BaseTransport] = None,
    timeout: Optional[float] = None,
) -> List[PitfallFinding]:
    """All six detectors, ordered by code then subjects."""
    findings: List[PitfallFinding] = []
    for code, detector in DETECTORS.items():
        if code is PitfallCode.P37:
            findings.extend(detect_p37(o, online=online, transport=transport, timeout=timeout))
        else:
            findings.extend(detector(o))
    return sorted(findings, key=PitfallFinding.sort_key)


def count_findings(findings: List[PitfallFinding]) -> Dict[str, int]:
    counts = {code.value: 0 for code in PitfallCode}
    for finding in findings:
        counts[finding.code.value] += 1
    return counts


__all__ = [
    "PITFALL_TITLES",
    "PitfallCode",
    "PitfallFinding",
    "count_findings",
    "detect_p05",
    "detect_p06",
    "detect_p19",
    "detect_p29",
    "detect_p37",
    "detect_p39",
    "scan",
]
