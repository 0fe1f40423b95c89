"""Decode model prediction records into a MultiDocGraph.

Predictions arrive as probability vectors, one file per document (event
triggers, moral labels, pairwise relations) plus one cross-document
coreference file per cluster. Every decoding step is a plain argmax with
ties broken toward the first index of the canonical label order, so decoding
is fully deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .graph import (
    Document,
    EdgeScope,
    Event,
    EventRelation,
    MORAL_ORDER,
    MoralLabel,
    MultiDocGraph,
    RelationLabel,
    merge_coreference,
    validate,
)

PROB_SUM_TOL = 1e-6


class SchemaError(ValueError):
    """A prediction record violates its schema."""


def _check_probs(name: str, probs: Sequence[float], size: int) -> tuple[float, ...]:
    probs = tuple(float(p) for p in probs)
    if len(probs) != size:
        raise SchemaError(f"{name}: expected {size} probabilities, got {len(probs)}")
    if any(p < 0.0 or p > 1.0 for p in probs):
        raise SchemaError(f"{name}: probabilities outside [0, 1]: {probs}")
    total = sum(probs)
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise SchemaError(f"{name}: probabilities sum to {total}, not 1")
    return probs


def _argmax(probs: Sequence[float]) -> int:
    # Ties go to the first index of the canonical order.
    best, best_p = 0, probs[0]
    for i, p in enumerate(probs):
        if p > best_p:
            best, best_p = i, p
    return best


@dataclass(frozen=True)
class EventPrediction:
    """Per-token trigger probability (p_event, p_non_event)."""

    doc_id: str
    token_index: int
    p_event: float
    p_non_event: float

    def __post_init__(self):
        _check_probs(f"event token {self.token_index}", (self.p_event, self.p_non_event), 2)


@dataclass(frozen=True)
class MoralPrediction:
    """11-way distribution over the canonical moral label order."""

    event_id: str
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", _check_probs(f"moral {self.event_id}", self.probs, 11))


@dataclass(frozen=True)
class PairPrediction:
    """Four per-family distributions for one ordered in-document event pair.

    The source event must precede the target in the text; each family's last
    entry is its "no relation" class.
    """

    source_event_id: str
    target_event_id: str
    coref_probs: tuple[float, ...]
    temporal_probs: tuple[float, ...]
    causal_probs: tuple[float, ...]
    subevent_probs: tuple[float, ...]

    def __post_init__(self):
        name = f"pair {self.source_event_id}->{self.target_event_id}"
        object.__setattr__(self, "coref_probs", _check_probs(name + " coref", self.coref_probs, 2))
        object.__setattr__(self, "temporal_probs", _check_probs(name + " temporal", self.temporal_probs, 4))
        object.__setattr__(self, "causal_probs", _check_probs(name + " causal", self.causal_probs, 3))
        object.__setattr__(self, "subevent_probs", _check_probs(name + " subevent", self.subevent_probs, 3))


@dataclass(frozen=True)
class CrossDocCluster:
    """A set of coreferent events spanning at least two documents."""

    member_event_ids: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "member_event_ids", frozenset(self.member_event_ids))


@dataclass(frozen=True)
class DocPredictions:
    """All prediction records for one document."""

    doc_id: str
    events: tuple[EventPrediction, ...]
    morals: tuple[MoralPrediction, ...]
    pairs: tuple[PairPrediction, ...]


ThresholdPolicy = Callable[[float, float], bool]


def argmax_policy(p_event: float, p_non_event: float) -> bool:
    """Default trigger rule: strict argmax, ties resolve to non-event."""
    return p_event > p_non_event


def make_event_id(doc_index: int, ordinal: int) -> str:
    return f"d{doc_index}_e{ordinal}"


def decode_events(
    doc: Document,
    preds: Sequence[EventPrediction],
    doc_index: int = 0,
    threshold_policy: ThresholdPolicy = argmax_policy,
) -> list[Event]:
    """Turn per-token trigger probabilities into Event nodes.

    Requires exactly one prediction per token, in token order. Emitted events
    carry moral=NON_MORAL until decorate_moral runs.
    """
    if len(preds) != len(doc.token_spans):
        raise SchemaError(
            f"{doc.doc_id}: {len(preds)} event predictions for {len(doc.token_spans)} tokens"
        )
    events: list[Event] = []
    for pred in sorted(preds, key=lambda p: p.token_index):
        if pred.doc_id != doc.doc_id:
            raise SchemaError(f"prediction doc_id {pred.doc_id!r} != document {doc.doc_id!r}")
        if not 0 <= pred.token_index < len(doc.token_spans):
            raise SchemaError(f"{doc.doc_id}: token_index {pred.token_index} out of range")
        if threshold_policy(pred.p_event, pred.p_non_event):
            start, end = doc.token_spans[pred.token_index]
            events.append(
                Event(
                    event_id=make_event_id(doc_index, len(events)),
                    doc_id=doc.doc_id,
                    trigger_span=(start, end),
                    trigger_text=doc.text[start:end],
                )
            )
    return events


def decorate_moral(events: Sequence[Event], preds: Sequence[MoralPrediction]) -> list[Event]:
    """Assign each event the argmax moral label of its 11-way distribution."""
    by_event = {}
    for pred in preds:
        if pred.event_id in by_event:
            raise SchemaError(f"duplicate moral prediction for {pred.event_id}")
        by_event[pred.event_id] = pred
    decorated = []
    for ev in events:
        pred = by_event.pop(ev.event_id, None)
        if pred is None:
            raise SchemaError(f"missing moral prediction for event {ev.event_id}")
        label = MORAL_ORDER[_argmax(pred.probs)]
        decorated.append(Event(ev.event_id, ev.doc_id, ev.trigger_span, ev.trigger_text, label))
    if by_event:
        raise SchemaError(f"moral predictions for unknown events: {sorted(by_event)}")
    return decorated


_TEMPORAL_DECODE = (RelationLabel.BEFORE, RelationLabel.AFTER, RelationLabel.OVERLAP, None)
_CAUSAL_DECODE = (RelationLabel.CAUSES, RelationLabel.CAUSED_BY, None)
_SUBEVENT_DECODE = (RelationLabel.CONTAINS, RelationLabel.CONTAINED_BY, None)


def decode_relations(pairs: Sequence[PairPrediction]) -> list[EventRelation]:
    """Decode the four relation families independently for each pair.

    A family whose argmax lands on its "no relation" class emits nothing, so
    one pair yields zero to four in-document edges. Labels are already
    directional in natural textual order.
    """
    relations: list[EventRelation] = []

    def emit(pair: PairPrediction, label: RelationLabel | None) -> None:
        if label is not None:
            relations.append(
                EventRelation(pair.source_event_id, pair.target_event_id, label, EdgeScope.IN_DOC)
            )

    for pair in pairs:
        if _argmax(pair.coref_probs) == 0:
            emit(pair, RelationLabel.COREFERENCE)
        emit(pair, _TEMPORAL_DECODE[_argmax(pair.temporal_probs)])
        emit(pair, _CAUSAL_DECODE[_argmax(pair.causal_probs)])
        emit(pair, _SUBEVENT_DECODE[_argmax(pair.subevent_probs)])
    return relations


def attach_crossdoc(graph: MultiDocGraph, clusters: Sequence[CrossDocCluster]) -> MultiDocGraph:
    """Wire cross-document coreference clusters into the graph.

    Each cluster becomes a spanning chain of coreference edges between
    consecutive members in (doc_id, char_start) order; consecutive members
    sharing a document get an in-doc edge instead of a cross-doc one. The
    coreference closure is then recomputed, so each input cluster reappears
    as (part of) a partition class.
    """
    result = validate(graph)
    if not result.ok:
        raise SchemaError(f"graph invalid before attach_crossdoc: {result.violations[0].detail}")
    events = graph.events_by_id()
    new_edges: list[EventRelation] = []
    for cluster in clusters:
        unknown = sorted(m for m in cluster.member_event_ids if m not in events)
        if unknown:
            raise SchemaError(f"cross-doc cluster cites unknown events: {unknown}")
        members = sorted(
            (events[m] for m in cluster.member_event_ids),
            key=lambda e: (e.doc_id, e.char_start),
        )
        for left, right in zip(members, members[1:]):
            if left.doc_id == right.doc_id:
                new_edges.append(
                    EventRelation(left.event_id, right.event_id, RelationLabel.COREFERENCE, EdgeScope.IN_DOC)
                )
            else:
                new_edges.append(
                    EventRelation(left.event_id, right.event_id, RelationLabel.COREFERENCE, EdgeScope.CROSS_DOC)
                )
    merged = MultiDocGraph(
        cluster_id=graph.cluster_id,
        documents=graph.documents,
        events=graph.events,
        relations=graph.relations + tuple(new_edges),
        coref_partition=graph.coref_partition,
    )
    return merge_coreference(merged)


def decode_graph(
    cluster_id: str,
    documents: Sequence[Document],
    predictions: Mapping[str, DocPredictions],
    crossdoc: Sequence[CrossDocCluster] = (),
    threshold_policy: ThresholdPolicy = argmax_policy,
) -> MultiDocGraph:
    """Run the full decoding pipeline for one cluster.

    Documents are decoded independently (events, morals, relations), then
    joined through the cross-document coreference clusters.
    """
    all_events: list[Event] = []
    all_relations: list[EventRelation] = []
    for doc_index, doc in enumerate(documents):
        preds = predictions.get(doc.doc_id)
        if preds is None:
            raise SchemaError(f"no predictions for document {doc.doc_id}")
        events = decode_events(doc, preds.events, doc_index, threshold_policy)
        events = decorate_moral(events, preds.morals)
        known = {e.event_id for e in events}
        for pair in preds.pairs:
            if pair.source_event_id not in known or pair.target_event_id not in known:
                raise SchemaError(
                    f"pair {pair.source_event_id}->{pair.target_event_id} cites undecoded events"
                )
        all_events.extend(events)
        all_relations.extend(decode_relations(preds.pairs))
    graph = MultiDocGraph(
        cluster_id=cluster_id,
        documents=tuple(documents),
        events=tuple(all_events),
        relations=tuple(all_relations),
    )
    return attach_crossdoc(graph, crossdoc)


# ---------------------------------------------------------------------------
# Prediction file parsing (one JSON file per document, one cross-doc file per
# cluster; schemas mirror the dataclasses above field for field).
# ---------------------------------------------------------------------------


def doc_predictions_from_dict(payload: Mapping) -> DocPredictions:
    try:
        doc_id = payload["doc_id"]
        events = tuple(
            EventPrediction(
                doc_id=e["doc_id"],
                token_index=int(e["token_index"]),
                p_event=float(e["p_event"]),
                p_non_event=float(e["p_non_event"]),
            )
            for e in payload["events"]
        )
        morals = tuple(
            MoralPrediction(event_id=m["event_id"], probs=tuple(m["probs"])) for m in payload["morals"]
        )
        pairs = tuple(
            PairPrediction(
                source_event_id=p["source_event_id"],
                target_event_id=p["target_event_id"],
                coref_probs=tuple(p["coref_probs"]),
                temporal_probs=tuple(p["temporal_probs"]),
                causal_probs=tuple(p["causal_probs"]),
                subevent_probs=tuple(p["subevent_probs"]),
            )
            for p in payload["pairs"]
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed document prediction record: {exc}") from exc
    return DocPredictions(doc_id=doc_id, events=events, morals=morals, pairs=pairs)


def crossdoc_from_dict(payload: Mapping) -> list[CrossDocCluster]:
    try:
        return [CrossDocCluster(frozenset(members)) for members in payload["clusters"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed cross-doc record: {exc}") from exc


def load_doc_predictions(path: str | Path) -> DocPredictions:
    return doc_predictions_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_crossdoc(path: str | Path) -> list[CrossDocCluster]:
    return crossdoc_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
