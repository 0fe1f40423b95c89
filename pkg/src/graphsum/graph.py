"""Multi-document event relation graph: data model, validation, coreference
closure, and per-graph statistics.

The graph is immutable after construction. Events are nodes, each carrying a
moral attribute; edges are typed event-event relations within one article
plus coreference links across articles of the same cluster.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence


class MoralLabel(Enum):
    """Ten moral foundation labels (five dimensions, positive/negative pole)
    plus the non-moral class. The member order is the canonical order used
    by prediction probability vectors."""

    CARE = "care"
    HARM = "harm"
    FAIRNESS = "fairness"
    CHEATING = "cheating"
    LOYALTY = "loyalty"
    BETRAYAL = "betrayal"
    AUTHORITY = "authority"
    SUBVERSION = "subversion"
    PURITY = "purity"
    DEGRADATION = "degradation"
    NON_MORAL = "non_moral"


MORAL_ORDER: tuple[MoralLabel, ...] = tuple(MoralLabel)


class RelationLabel(Enum):
    """The eight event-event relation labels. Directed labels come in both
    orientations so edges are always stored in natural textual order."""

    COREFERENCE = "coreference"
    BEFORE = "before"
    AFTER = "after"
    OVERLAP = "overlap"
    CAUSES = "causes"
    CAUSED_BY = "caused_by"
    CONTAINS = "contains"
    CONTAINED_BY = "contained_by"


RELATION_ORDER: tuple[RelationLabel, ...] = tuple(RelationLabel)
RELATION_INDEX: dict[RelationLabel, int] = {r: i for i, r in enumerate(RELATION_ORDER)}

TEMPORAL_LABELS = frozenset({RelationLabel.BEFORE, RelationLabel.AFTER, RelationLabel.OVERLAP})
CAUSAL_LABELS = frozenset({RelationLabel.CAUSES, RelationLabel.CAUSED_BY})
SUBEVENT_LABELS = frozenset({RelationLabel.CONTAINS, RelationLabel.CONTAINED_BY})


class Ideology(Enum):
    LEFT = "left"
    CENTER = "center"
    RIGHT = "right"
    UNKNOWN = "unknown"


class EdgeScope(Enum):
    IN_DOC = "in_doc"
    CROSS_DOC = "cross_doc"


@dataclass(frozen=True)
class Document:
    """One article of a cluster with its word-level token offsets."""

    doc_id: str
    ideology_tag: Ideology
    text: str
    token_spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "token_spans", tuple(tuple(s) for s in self.token_spans))

    def token_text(self, index: int) -> str:
        start, end = self.token_spans[index]
        return self.text[start:end]


@dataclass(frozen=True)
class Event:
    """A trigger span in one document, decorated with a moral attribute."""

    event_id: str
    doc_id: str
    trigger_span: tuple[int, int]
    trigger_text: str
    moral: MoralLabel = MoralLabel.NON_MORAL

    def __post_init__(self):
        object.__setattr__(self, "trigger_span", tuple(self.trigger_span))

    @property
    def char_start(self) -> int:
        return self.trigger_span[0]


@dataclass(frozen=True)
class EventRelation:
    """A typed directed edge between two events."""

    source: str
    target: str
    label: RelationLabel
    scope: EdgeScope


@dataclass(frozen=True)
class MultiDocGraph:
    """The full per-cluster graph. Immutable; all operations return new
    graphs. Duplicate (source, target, label) edges are dropped on
    construction, keeping the first occurrence."""

    cluster_id: str
    documents: tuple[Document, ...]
    events: tuple[Event, ...]
    relations: tuple[EventRelation, ...]
    coref_partition: tuple[frozenset[str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "events", tuple(self.events))
        seen: set[tuple[str, str, RelationLabel]] = set()
        deduped = []
        for rel in self.relations:
            key = (rel.source, rel.target, rel.label)
            if key not in seen:
                seen.add(key)
                deduped.append(rel)
        object.__setattr__(self, "relations", tuple(deduped))
        object.__setattr__(
            self, "coref_partition", tuple(frozenset(s) for s in self.coref_partition)
        )

    def events_by_id(self) -> dict[str, Event]:
        return {e.event_id: e for e in self.events}

    def documents_by_id(self) -> dict[str, Document]:
        return {d.doc_id: d for d in self.documents}

    def events_of_doc(self, doc_id: str) -> list[Event]:
        return sorted(
            (e for e in self.events if e.doc_id == doc_id), key=lambda e: e.char_start
        )


@dataclass(frozen=True)
class GraphStats:
    """Per-graph counts mirroring the corpus statistics table."""

    n_events: int
    n_moral_events: int
    n_event_pairs: int
    n_coref: int
    n_temporal: int
    n_causal: int
    n_subevent: int
    n_crossdoc_coref: int


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[Violation, ...] = ()


class GraphValidationError(ValueError):
    """Raised when an operation is handed a graph that fails validation."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = tuple(violations)
        lines = "; ".join(f"{v.rule}[{v.subject}]: {v.detail}" for v in self.violations)
        super().__init__(f"graph validation failed: {lines}")


# Rules that only concern coref_partition consistency; merge_coreference
# tolerates these because it rebuilds the partition from scratch.
_PARTITION_RULES = frozenset(
    {"partition-disjoint", "partition-size", "partition-membership", "coref-edge-partition"}
)


def validate(graph: MultiDocGraph, strict_neus: bool = False) -> ValidationResult:
    """Check every structural invariant of the graph.

    Violations are data, not exceptions: each one names the offending element
    and the rule it breaks. With strict_neus=True the cluster must also hold
    exactly three documents covering left, center, and right sources.
    """
    violations: list[Violation] = []
    docs = {}
    for doc in graph.documents:
        if doc.doc_id in docs:
            violations.append(Violation("doc-unique", doc.doc_id, "duplicate doc_id"))
        docs[doc.doc_id] = doc
        prev_end = None
        for k, (start, end) in enumerate(doc.token_spans):
            if not (0 <= start < end <= len(doc.text)):
                violations.append(
                    Violation("token-span-bounds", doc.doc_id, f"token {k} span {start, end} out of bounds")
                )
            if prev_end is not None and start < prev_end:
                violations.append(
                    Violation("token-span-order", doc.doc_id, f"token {k} overlaps or precedes token {k - 1}")
                )
            prev_end = end

    events = {}
    for ev in graph.events:
        if ev.event_id in events:
            violations.append(Violation("event-unique", ev.event_id, "duplicate event_id"))
        events[ev.event_id] = ev
        doc = docs.get(ev.doc_id)
        if doc is None:
            violations.append(Violation("event-doc", ev.event_id, f"unknown doc_id {ev.doc_id!r}"))
            continue
        start, end = ev.trigger_span
        if not (0 <= start < end <= len(doc.text)):
            violations.append(Violation("trigger-bounds", ev.event_id, f"span {ev.trigger_span} outside document"))
        elif doc.text[start:end] != ev.trigger_text:
            violations.append(
                Violation(
                    "trigger-text",
                    ev.event_id,
                    f"trigger_text {ev.trigger_text!r} != document substring {doc.text[start:end]!r}",
                )
            )

    for rel in graph.relations:
        subject = f"{rel.source}->{rel.target}"
        if rel.source == rel.target:
            violations.append(Violation("self-edge", subject, "source equals target"))
            continue
        src = events.get(rel.source)
        tgt = events.get(rel.target)
        if src is None or tgt is None:
            violations.append(Violation("dangling-endpoint", subject, "edge endpoint names a missing event"))
            continue
        if rel.scope is EdgeScope.IN_DOC:
            if src.doc_id != tgt.doc_id:
                violations.append(Violation("in-doc-same-doc", subject, "in_doc edge spans two documents"))
            elif src.char_start >= tgt.char_start:
                violations.append(
                    Violation("in-doc-order", subject, "in_doc edge source must start before target")
                )
        else:
            if rel.label is not RelationLabel.COREFERENCE:
                violations.append(
                    Violation("cross-doc-label", subject, "cross-doc edges must be coreference")
                )
            if src is not None and tgt is not None and src.doc_id == tgt.doc_id:
                violations.append(Violation("cross-doc-docs", subject, "cross_doc edge within one document"))

    seen_members: set[str] = set()
    for idx, members in enumerate(graph.coref_partition):
        subject = f"partition[{idx}]"
        if len(members) < 2:
            violations.append(Violation("partition-size", subject, "partition set smaller than 2"))
        overlap = members & seen_members
        if overlap:
            violations.append(
                Violation("partition-disjoint", subject, f"events {sorted(overlap)} appear in two sets")
            )
        seen_members |= members
        for member in members:
            if member not in events:
                violations.append(Violation("partition-membership", subject, f"unknown event {member!r}"))

    class_of: dict[str, int] = {}
    for idx, members in enumerate(graph.coref_partition):
        for member in members:
            class_of.setdefault(member, idx)
    for rel in graph.relations:
        if rel.label is RelationLabel.COREFERENCE and rel.source in events and rel.target in events:
            if class_of.get(rel.source) is None or class_of.get(rel.source) != class_of.get(rel.target):
                violations.append(
                    Violation(
                        "coref-edge-partition",
                        f"{rel.source}->{rel.target}",
                        "coreference edge endpoints not in one partition set",
                    )
                )

    if strict_neus:
        tags = sorted(d.ideology_tag.value for d in graph.documents)
        if len(graph.documents) != 3 or tags != ["center", "left", "right"]:
            violations.append(
                Violation("neus-shape", graph.cluster_id, "cluster must hold exactly one left, center, right article")
            )

    return ValidationResult(ok=not violations, violations=tuple(violations))


class DisjointSet:
    """Union-find over opaque string ids with path compression."""

    def __init__(self, items: Iterable[str] = ()):
        self.parent: dict[str, str] = {x: x for x in items}

    def add(self, x: str) -> None:
        self.parent.setdefault(x, x)

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def components(self) -> list[set[str]]:
        groups: dict[str, set[str]] = {}
        for x in self.parent:
            groups.setdefault(self.find(x), set()).add(x)
        return list(groups.values())


def merge_coreference(graph: MultiDocGraph) -> MultiDocGraph:
    """Rebuild coref_partition as the connected components of all coreference
    edges (in-doc and cross-doc alike), keeping only components of size >= 2.

    Idempotent: the partition depends only on the edge set, which is not
    modified here.
    """
    result = validate(graph)
    hard = [v for v in result.violations if v.rule not in _PARTITION_RULES]
    if hard:
        raise GraphValidationError(hard)

    dsu = DisjointSet(e.event_id for e in graph.events)
    for rel in graph.relations:
        if rel.label is RelationLabel.COREFERENCE:
            dsu.union(rel.source, rel.target)
    components = [c for c in dsu.components() if len(c) >= 2]
    components.sort(key=lambda c: min(c))
    return replace(graph, coref_partition=tuple(frozenset(c) for c in components))


def compute_stats(graph: MultiDocGraph) -> GraphStats:
    """Count events, moral events, candidate in-doc pairs, and edges per
    relation family. n_event_pairs sums C(k, 2) over per-document event
    counts k: all pairs a relation extractor would score."""
    per_doc: dict[str, int] = {}
    n_moral = 0
    for ev in graph.events:
        per_doc[ev.doc_id] = per_doc.get(ev.doc_id, 0) + 1
        if ev.moral is not MoralLabel.NON_MORAL:
            n_moral += 1
    n_pairs = sum(k * (k - 1) // 2 for k in per_doc.values())

    n_coref = n_temporal = n_causal = n_subevent = n_crossdoc = 0
    for rel in graph.relations:
        if rel.scope is EdgeScope.CROSS_DOC:
            n_crossdoc += 1
        elif rel.label is RelationLabel.COREFERENCE:
            n_coref += 1
        elif rel.label in TEMPORAL_LABELS:
            n_temporal += 1
        elif rel.label in CAUSAL_LABELS:
            n_causal += 1
        elif rel.label in SUBEVENT_LABELS:
            n_subevent += 1

    return GraphStats(
        n_events=len(graph.events),
        n_moral_events=n_moral,
        n_event_pairs=n_pairs,
        n_coref=n_coref,
        n_temporal=n_temporal,
        n_causal=n_causal,
        n_subevent=n_subevent,
        n_crossdoc_coref=n_crossdoc,
    )


def common_vs_unique_events(
    graph: MultiDocGraph,
) -> tuple[frozenset[str], dict[str, frozenset[str]]]:
    """Split events into those whose coreference class spans at least two
    documents (commonly reported) and the rest, keyed by document
    (selectively reported). Requires coref_partition populated by
    merge_coreference."""
    events = graph.events_by_id()
    common: set[str] = set()
    for members in graph.coref_partition:
        docs = {events[m].doc_id for m in members if m in events}
        if len(docs) >= 2:
            common |= members
    unique: dict[str, set[str]] = {d.doc_id: set() for d in graph.documents}
    for ev in graph.events:
        if ev.event_id not in common:
            unique.setdefault(ev.doc_id, set()).add(ev.event_id)
    return frozenset(common), {k: frozenset(v) for k, v in unique.items()}


# ---------------------------------------------------------------------------
# JSON serialization. Orderings are pinned so identical graphs always produce
# identical bytes: documents by doc_id, events by (doc_id, char_start),
# relations by (source, canonical label order, target).
# ---------------------------------------------------------------------------


def to_dict(graph: MultiDocGraph) -> dict:
    documents = sorted(graph.documents, key=lambda d: d.doc_id)
    events = sorted(graph.events, key=lambda e: (e.doc_id, e.trigger_span[0], e.event_id))
    relations = sorted(
        graph.relations, key=lambda r: (r.source, RELATION_INDEX[r.label], r.target)
    )
    partition = sorted((sorted(members) for members in graph.coref_partition), key=lambda m: m[0])
    return {
        "cluster_id": graph.cluster_id,
        "documents": [
            {
                "doc_id": d.doc_id,
                "ideology_tag": d.ideology_tag.value,
                "text": d.text,
                "token_spans": [list(span) for span in d.token_spans],
            }
            for d in documents
        ],
        "events": [
            {
                "event_id": e.event_id,
                "doc_id": e.doc_id,
                "trigger_span": list(e.trigger_span),
                "trigger_text": e.trigger_text,
                "moral": e.moral.value,
            }
            for e in events
        ],
        "relations": [
            {
                "source": r.source,
                "target": r.target,
                "label": r.label.value,
                "scope": r.scope.value,
            }
            for r in relations
        ],
        "coref_partition": partition,
    }


def from_dict(payload: Mapping) -> MultiDocGraph:
    return MultiDocGraph(
        cluster_id=payload["cluster_id"],
        documents=tuple(
            Document(
                doc_id=d["doc_id"],
                ideology_tag=Ideology(d["ideology_tag"]),
                text=d["text"],
                token_spans=tuple(tuple(span) for span in d["token_spans"]),
            )
            for d in payload["documents"]
        ),
        events=tuple(
            Event(
                event_id=e["event_id"],
                doc_id=e["doc_id"],
                trigger_span=tuple(e["trigger_span"]),
                trigger_text=e["trigger_text"],
                moral=MoralLabel(e["moral"]),
            )
            for e in payload["events"]
        ),
        relations=tuple(
            EventRelation(
                source=r["source"],
                target=r["target"],
                label=RelationLabel(r["label"]),
                scope=EdgeScope(r["scope"]),
            )
            for r in payload["relations"]
        ),
        coref_partition=tuple(frozenset(members) for members in payload["coref_partition"]),
    )


def dumps(graph: MultiDocGraph) -> str:
    return json.dumps(to_dict(graph), ensure_ascii=False, indent=2) + "\n"


def loads(text: str) -> MultiDocGraph:
    return from_dict(json.loads(text))
