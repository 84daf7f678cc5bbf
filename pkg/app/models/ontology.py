"""OWL ontologies in Turtle: parsing, signatures, subclass graphs, merging, serialization.

An :class:`Ontology` is an immutable triple set built on rdflib terms. Blank nodes
are labelled from their content on construction, so equal structures carry equal
labels in any graph and merging is a plain set union.
"""

import hashlib
import logging
import re
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field
from rdflib import BNode, Graph, Literal, URIRef
from rdflib.namespace import OWL, RDF, RDFS, XSD

from app.core.errors import TurtleSyntaxError
from app.models.common import Diagnostic, TermKind

logger = logging.getLogger(__name__)

Triple = Tuple[Any, Any, Any]

STANDARD_PREFIXES: Dict[str, str] = {
    "owl": str(OWL),
    "rdf": str(RDF),
    "rdfs": str(RDFS),
    "xsd": str(XSD),
}
STANDARD_NAMESPACES: Tuple[str, ...] = tuple(STANDARD_PREFIXES.values()) + (
    "http://www.w3.org/XML/1998/namespace",
)

CLASS_TYPES = frozenset({OWL.Class, RDFS.Class})
DECLARATION_TYPES = frozenset(
    {
        OWL.Class,
        RDFS.Class,
        OWL.ObjectProperty,
        OWL.DatatypeProperty,
        OWL.AnnotationProperty,
        OWL.TransitiveProperty,
        OWL.SymmetricProperty,
        OWL.FunctionalProperty,
        OWL.InverseFunctionalProperty,
        RDF.Property,
    }
)

_PREFIX_DECL = re.compile(r"(?i)(?:@prefix|\bprefix)\s+([A-Za-z][\w.\-]*)?:\s*<([^>\s]*)>")
_PN_LOCAL = re.compile(r"^(?:[A-Za-z_][A-Za-z0-9_\-]*)?$")
_URN = re.compile(r"^urn:[a-z0-9][a-z0-9\-]{0,31}:\S+$", re.IGNORECASE)


# -----------------------------
# IRI helpers
# -----------------------------


def is_valid_iri(value: str) -> bool:
    if not value or any(ch.isspace() for ch in value):
        return False
    return "://" in value or bool(_URN.match(value))


def split_iri(iri: str) -> Tuple[str, str]:
    """Split an IRI into (namespace, local name) at the last '#' or '/'."""
    cut = max(iri.rfind("#"), iri.rfind("/"))
    if cut < 0:
        cut = iri.rfind(":")
    return iri[: cut + 1], iri[cut + 1 :]


def local_name(iri: str) -> str:
    return split_iri(iri)[1]


def is_standard(iri: str) -> bool:
    return any(str(iri).startswith(ns) for ns in STANDARD_NAMESPACES)


# -----------------------------
# Domain types
# -----------------------------


class Signature(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    classes: FrozenSet[URIRef] = frozenset()
    object_properties: FrozenSet[URIRef] = frozenset()
    data_properties: FrozenSet[URIRef] = frozenset()

    def terms(self, kind: TermKind) -> FrozenSet[URIRef]:
        if kind is TermKind.CLASS:
            return self.classes
        if kind is TermKind.OBJECT_PROPERTY:
            return self.object_properties
        return self.data_properties

    def has(self, iri: str, kind: TermKind) -> bool:
        return URIRef(str(iri)) in self.terms(kind)

    def kinds_of(self, iri: str) -> List[TermKind]:
        return [kind for kind in TermKind if self.has(iri, kind)]

    def all_terms(self) -> FrozenSet[URIRef]:
        return self.classes | self.object_properties | self.data_properties


class Ontology(BaseModel):
    """An immutable Turtle-derived triple set with its prefix map."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    triples: FrozenSet[Triple] = frozenset()
    prefixes: Dict[str, str] = Field(default_factory=lambda: dict(STANDARD_PREFIXES))
    ontology_iri: Optional[URIRef] = None
    diagnostics: Tuple[Diagnostic, ...] = ()

    def objects(self, subject: Any, predicate: Any) -> Set[Any]:
        return {o for s, p, o in self.triples if s == subject and p == predicate}

    def subjects(self, predicate: Any, obj: Any) -> Set[Any]:
        return {s for s, p, o in self.triples if p == predicate and o == obj}

    def pairs(self, predicate: Any) -> Set[Tuple[Any, Any]]:
        return {(s, o) for s, p, o in self.triples if p == predicate}

    def header_subjects(self) -> Set[Any]:
        return self.subjects(RDF.type, OWL.Ontology)

    def to_graph(self) -> Graph:
        graph = Graph(bind_namespaces="none")
        for prefix, namespace in self.prefixes.items():
            graph.bind(prefix, namespace, override=True)
        for triple in self.triples:
            graph.add(triple)
        return graph


# -----------------------------
# Construction
# -----------------------------


def _has_blank_nodes(triples: Iterable[Triple]) -> bool:
    return any(isinstance(s, BNode) or isinstance(o, BNode) for s, _p, o in triples)


def _blank_labels(triples: FrozenSet[Triple]) -> Dict[BNode, BNode]:
    """Label every blank node by a digest of what it reaches through outgoing edges.

    Incoming edges never take part, so a structure keeps its label whatever graph
    it sits in and equal structures share one node.
    """
    outgoing: Dict[BNode, List[Tuple[Any, Any]]] = {}
    nodes: Set[BNode] = set()
    for s, p, o in triples:
        if isinstance(s, BNode):
            outgoing.setdefault(s, []).append((p, o))
            nodes.add(s)
        if isinstance(o, BNode):
            nodes.add(o)

    done: Dict[BNode, str] = {}

    def digest(node: BNode, path: FrozenSet[BNode]) -> Tuple[str, bool]:
        if node in done:
            return done[node], True
        if node in path:
            return "cycle", False
        acyclic = True
        parts = []
        for p, o in outgoing.get(node, ()):
            if isinstance(o, BNode):
                value, closed = digest(o, path | {node})
                acyclic = acyclic and closed
                parts.append(f"{p.n3()} _:{value}")
            else:
                parts.append(f"{p.n3()} {o.n3()}")
        value = hashlib.sha256("\n".join(sorted(parts)).encode("utf-8")).hexdigest()[:24]
        if acyclic:
            done[node] = value
        return value, acyclic

    return {node: BNode(f"b{digest(node, frozenset())[0]}") for node in nodes}


def _canonical(triples: Iterable[Triple]) -> FrozenSet[Triple]:
    triples = frozenset(triples)
    if not _has_blank_nodes(triples):
        return triples
    labels = _blank_labels(triples)
    return frozenset((labels.get(s, s), p, labels.get(o, o)) for s, p, o in triples)


def _header_iri(triples: FrozenSet[Triple]) -> Tuple[Optional[URIRef], List[Diagnostic]]:
    headers = sorted({s for s, p, o in triples if p == RDF.type and o == OWL.Ontology}, key=str)
    if len(headers) > 1:
        return None, [
            Diagnostic(
                code="MultipleOntologyHeaders",
                message=f"{len(headers)} owl:Ontology subjects declared",
                subject=", ".join(str(h) for h in headers),
            )
        ]
    if len(headers) == 1 and isinstance(headers[0], URIRef):
        return headers[0], []
    return None, []


def _kind_conflicts(triples: FrozenSet[Triple]) -> List[Diagnostic]:
    obj = {s for s, p, o in triples if p == RDF.type and o == OWL.ObjectProperty}
    data = {s for s, p, o in triples if p == RDF.type and o == OWL.DatatypeProperty}
    return [
        Diagnostic(
            code="PropertyKindConflict",
            message="term typed as both owl:ObjectProperty and owl:DatatypeProperty",
            subject=str(term),
        )
        for term in sorted(obj & data, key=str)
    ]


def build_ontology(
    triples: Iterable[Triple],
    prefixes: Optional[Mapping[str, str]] = None,
    ontology_iri: Optional[URIRef] = None,
    *,
    detect_header: bool = True,
) -> Ontology:
    """Create an :class:`Ontology` with canonical blank nodes and loader diagnostics."""
    canonical = _canonical(triples)
    diagnostics: List[Diagnostic] = []
    if detect_header:
        ontology_iri, diagnostics = _header_iri(canonical)
    diagnostics.extend(_kind_conflicts(canonical))
    merged_prefixes = dict(STANDARD_PREFIXES)
    merged_prefixes.update(prefixes or {})
    return Ontology(
        triples=canonical,
        prefixes=merged_prefixes,
        ontology_iri=ontology_iri,
        diagnostics=tuple(diagnostics),
    )


def declared_prefixes(text: str) -> Dict[str, str]:
    """Prefix declarations (Turtle or SPARQL style) found in a text, in order."""
    found: Dict[str, str] = {}
    for match in _PREFIX_DECL.finditer(text or ""):
        namespace = match.group(2)
        if is_valid_iri(namespace):
            found[match.group(1) or ""] = namespace
    return found


def parse_turtle(text: str, default_prefixes: Optional[Mapping[str, str]] = None) -> Ontology:
    """Parse a Turtle document.

    The standard rdf/rdfs/owl/xsd prefixes, plus any ``default_prefixes``, are in
    scope before the document starts; the document's own declarations win.
    """
    text = (text or "").removeprefix("\ufeff")
    defaults = dict(STANDARD_PREFIXES)
    defaults.update(default_prefixes or {})
    header = "".join(f"@prefix {p}: <{ns}> .\n" for p, ns in sorted(defaults.items()))
    source = header + text
    graph = Graph(bind_namespaces="none")
    try:
        graph.parse(data=source, format="turtle")
    except Exception as exc:  # noqa: BLE001
        raise _syntax_error(exc, text, len(header), header.count("\n")) from exc

    prefixes = dict(defaults)
    prefixes.update(declared_prefixes(text))
    ontology = build_ontology(graph, prefixes)
    for diagnostic in ontology.diagnostics:
        logger.warning("%s: %s (%s)", diagnostic.code, diagnostic.message, diagnostic.subject)
    return ontology


def _syntax_error(exc: Exception, text: str, offset: int, header_lines: int) -> TurtleSyntaxError:
    message = str(getattr(exc, "_why", "") or exc).strip() or exc.__class__.__name__
    position = getattr(exc, "_i", None)
    if isinstance(position, int) and position >= offset:
        pos = min(position - offset, len(text))
        line = text.count("\n", 0, pos) + 1
        column = pos - (text.rfind("\n", 0, pos) + 1) + 1
        return TurtleSyntaxError(line, column, message)
    lines = getattr(exc, "lines", None)
    if isinstance(lines, int):
        return TurtleSyntaxError(max(1, lines + 1 - header_lines), 1, message)
    return TurtleSyntaxError(1, 1, message)


# -----------------------------
# Interrogation
# -----------------------------


def _named(term: Any) -> bool:
    return isinstance(term, URIRef) and not is_standard(term)


def signature(o: Ontology) -> Signature:
    """Named classes, object properties and data properties of an ontology.

    Classes include untyped terms used as subclass endpoints, property domains
    and object-property ranges, since generated files often skip declarations.
    """
    typed: Dict[Any, Set[Any]] = {}
    for s, p, obj in o.triples:
        if p == RDF.type:
            typed.setdefault(s, set()).add(obj)

    object_properties = {s for s, types in typed.items() if OWL.ObjectProperty in types and _named(s)}
    data_properties = {s for s, types in typed.items() if OWL.DatatypeProperty in types and _named(s)}
    classes = {s for s, types in typed.items() if types & CLASS_TYPES and _named(s)}

    for s, p, obj in o.triples:
        if p == RDFS.subClassOf:
            classes.update(t for t in (s, obj) if _named(t))
        elif p == RDFS.domain and (s in object_properties or s in data_properties):
            if _named(obj):
                classes.add(obj)
        elif p == RDFS.range and s in object_properties:
            if _named(obj):
                classes.add(obj)

    return Signature(
        classes=frozenset(classes),
        object_properties=frozenset(object_properties),
        data_properties=frozenset(data_properties),
    )


def declared_terms(o: Ontology) -> Set[URIRef]:
    """Named terms carrying an explicit class or property declaration."""
    return {
        s
        for s, p, obj in o.triples
        if p == RDF.type and obj in DECLARATION_TYPES and isinstance(s, URIRef)
    }


def subclass_graph(o: Ontology) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(signature(o).classes, key=str))
    for sub, sup in o.pairs(RDFS.subClassOf):
        if _named(sub) and _named(sup):
            graph.add_edge(sub, sup)
    return graph


# -----------------------------
# Merge
# -----------------------------


def _unite_prefixes(a: Mapping[str, str], b: Mapping[str, str]) -> Dict[str, str]:
    united = dict(a)
    bound = set(united.values())
    for prefix, namespace in sorted(b.items()):
        if united.get(prefix) == namespace:
            continue
        if prefix not in united:
            united[prefix] = namespace
            bound.add(namespace)
            continue
        if namespace in bound:
            continue
        n = 1
        while f"{prefix}{n}" in united:
            n += 1
        united[f"{prefix}{n}"] = namespace
        bound.add(namespace)
    return united


def merge(a: Ontology, b: Ontology) -> Ontology:
    """Union of two ontologies; ``a``'s prefix names and ontology IRI take priority."""
    return build_ontology(
        a.triples | b.triples,
        _unite_prefixes(a.prefixes, b.prefixes),
        a.ontology_iri if a.ontology_iri is not None else b.ontology_iri,
        detect_header=False,
    )


def merge_all(ontologies: Iterable[Ontology]) -> Ontology:
    merged = Ontology()
    for ontology in ontologies:
        merged = merge(merged, ontology)
    return merged


# -----------------------------
# Serialization
# -----------------------------


def _term_key(term: Any) -> tuple:
    if isinstance(term, URIRef):
        return (0, str(term), "", "")
    if isinstance(term, BNode):
        return (1, str(term), "", "")
    return (2, str(term), str(getattr(term, "datatype", "") or ""), getattr(term, "language", "") or "")


def triple_sort_key(triple: Triple) -> tuple:
    return tuple(_term_key(t) for t in triple)


class _Renderer:
    def __init__(self, prefixes: Mapping[str, str]) -> None:
        # Longest namespace first, then prefix name, for a stable choice
        self._prefixes = sorted(prefixes.items(), key=lambda kv: (-len(kv[1]), kv[0]))

    def iri(self, iri: URIRef) -> str:
        value = str(iri)
        for prefix, namespace in self._prefixes:
            if namespace and value.startswith(namespace):
                local = value[len(namespace) :]
                if _PN_LOCAL.match(local):
                    return f"{prefix}:{local}"
        return f"<{value}>"

    def term(self, term: Any, *, predicate: bool = False) -> str:
        if predicate and term == RDF.type:
            return "a"
        if isinstance(term, URIRef):
            return self.iri(term)
        if isinstance(term, BNode):
            return f"_:{term}"
        if isinstance(term, Literal):
            quoted = Literal(str(term)).n3()
            if term.language:
                return f"{quoted}@{term.language}"
            if term.datatype is not None:
                return f"{quoted}^^{self.iri(term.datatype)}"
            return quoted
        raise TypeError(f"unsupported RDF term: {term!r}")


def serialize_turtle(o: Ontology) -> str:
    """Deterministic Turtle: sorted prefixes, then triples sorted by (s, p, o)."""
    renderer = _Renderer(o.prefixes)
    lines = [f"@prefix {prefix}: <{ns}> ." for prefix, ns in sorted(o.prefixes.items())]

    by_subject: Dict[Any, List[Triple]] = {}
    for triple in sorted(o.triples, key=triple_sort_key):
        by_subject.setdefault(triple[0], []).append(triple)

    for subject, triples in by_subject.items():
        lines.append("")
        head = renderer.term(subject)
        body = [f"{renderer.term(p, predicate=True)} {renderer.term(obj)}" for _s, p, obj in triples]
        if len(body) == 1:
            lines.append(f"{head} {body[0]} .")
            continue
        lines.append(f"{head} {body[0]} ;")
        for item in body[1:-1]:
            lines.append(f"    {item} ;")
        lines.append(f"    {body[-1]} .")
    return "\n".join(lines) + "\n"


__all__ = [
    "Ontology",
    "Signature",
    "STANDARD_PREFIXES",
    "build_ontology",
    "declared_prefixes",
    "declared_terms",
    "is_standard",
    "is_valid_iri",
    "local_name",
    "merge",
    "merge_all",
    "parse_turtle",
    "serialize_turtle",
    "signature",
    "split_iri",
    "subclass_graph",
    "triple_sort_key",
]
