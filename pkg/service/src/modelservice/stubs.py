"""Deterministic stub predictors.

These rules exist to make the summarization pipeline testable end to end
without trained models: wordlist-based event triggers, keyword moral labels,
positional relation heuristics, trigger-equality cross-document coreference,
and keyword ideology scoring. They claim no fidelity to any trained system.

The pipeline's fixture prediction files are generated from these rules
(scripts/generate_fixtures.py); the ideology rule additionally mirrors the
pipeline's built-in keyword scorer. Responses are pure functions of the
request, so identical requests always produce identical bytes.
"""

from __future__ import annotations

import re
from itertools import combinations
from typing import Iterable, Mapping, Sequence

EVENT_WORDS = frozenset(
    {
        "announced",
        "appealed",
        "approved",
        "betrayed",
        "blocked",
        "challenged",
        "defended",
        "demanded",
        "denied",
        "filed",
        "halted",
        "launched",
        "passed",
        "praised",
        "protect",
        "protected",
        "protested",
        "recalled",
        "reinstated",
        "rejected",
        "ruled",
        "signed",
        "stalled",
        "sued",
        "vowed",
        "warned",
    }
)

# word -> index in the canonical 11-label moral order:
# care, harm, fairness, cheating, loyalty, betrayal, authority, subversion,
# purity, degradation, non_moral.
MORAL_WORDS = {
    "protect": 0,
    "protected": 0,
    "praised": 0,
    "warned": 1,
    "sued": 2,
    "cheated": 3,
    "defended": 4,
    "betrayed": 5,
    "ruled": 6,
    "subverted": 7,
    "sanctified": 8,
    "degraded": 9,
}
NON_MORAL_INDEX = 10
N_MORAL_LABELS = 11

CAUSAL_TRIGGERS = frozenset({"blocked", "caused", "prompted", "recalled", "sparked"})
CONTAINER_TRIGGERS = frozenset({"campaign", "launched", "summit", "war"})

# Mirrors the pipeline's keyword ideology scorer; keep in sync.
POLAR_WORDS = frozenset(
    {
        "activists",
        "betrayed",
        "critics",
        "disaster",
        "extremist",
        "outrage",
        "radical",
        "slammed",
        "tainted",
    }
)
POLAR_WEIGHT = 0.15
POLAR_CAP = 0.9

EVENT_PROBS = (0.9, 0.1)
NON_EVENT_PROBS = (0.1, 0.9)
COREF_MATCH = (0.9, 0.1)
COREF_NONE = (0.1, 0.9)
TEMPORAL_BEFORE = (0.7, 0.1, 0.1, 0.1)
TEMPORAL_NONE = (0.1, 0.1, 0.1, 0.7)
CAUSAL_CAUSES = (0.8, 0.1, 0.1)
CAUSAL_NONE = (0.1, 0.1, 0.8)
SUBEVENT_CONTAINS = (0.8, 0.1, 0.1)
SUBEVENT_NONE = (0.1, 0.1, 0.8)

_STRIP = re.compile(r"^[^a-z0-9]+|[^a-z0-9]+$")
_WORD = re.compile(r"[a-z0-9]+")


def normalize(token: str) -> str:
    """Lowercase and strip surrounding punctuation."""
    return _STRIP.sub("", token.lower())


def predict_events(doc: Mapping) -> list[dict]:
    """One (p_event, p_non_event) pair per token: a token triggers an event
    iff its normalized form is in the event wordlist."""
    text = doc["text"]
    out = []
    for index, (start, end) in enumerate(doc["token_spans"]):
        probs = EVENT_PROBS if normalize(text[start:end]) in EVENT_WORDS else NON_EVENT_PROBS
        out.append(
            {
                "doc_id": doc["doc_id"],
                "token_index": index,
                "p_event": probs[0],
                "p_non_event": probs[1],
            }
        )
    return out


def _moral_probs(trigger: str) -> list[float]:
    peak = MORAL_WORDS.get(normalize(trigger), NON_MORAL_INDEX)
    probs = [0.02] * N_MORAL_LABELS
    probs[peak] = 0.8
    return probs


def predict_morals(events: Sequence[Mapping]) -> list[dict]:
    return [
        {"event_id": ev["event_id"], "probs": _moral_probs(ev["trigger_text"])} for ev in events
    ]


def predict_relations(events: Sequence[Mapping]) -> list[dict]:
    """All C(k, 2) pairs of one document's events in textual order.

    Adjacent events get a before-peaked temporal distribution; an adjacent
    pair whose source is a causal trigger also peaks at "causes", and a
    container trigger peaks at "contains". Equal normalized triggers peak
    coreference regardless of distance.
    """
    ordered = sorted(events, key=lambda e: e["char_start"])
    pairs = []
    for i, j in combinations(range(len(ordered)), 2):
        src, tgt = ordered[i], ordered[j]
        adjacent = j == i + 1
        src_norm = normalize(src["trigger_text"])
        tgt_norm = normalize(tgt["trigger_text"])
        pairs.append(
            {
                "source_event_id": src["event_id"],
                "target_event_id": tgt["event_id"],
                "coref_probs": list(COREF_MATCH if src_norm == tgt_norm else COREF_NONE),
                "temporal_probs": list(TEMPORAL_BEFORE if adjacent else TEMPORAL_NONE),
                "causal_probs": list(
                    CAUSAL_CAUSES if adjacent and src_norm in CAUSAL_TRIGGERS else CAUSAL_NONE
                ),
                "subevent_probs": list(
                    SUBEVENT_CONTAINS if adjacent and src_norm in CONTAINER_TRIGGERS else SUBEVENT_NONE
                ),
            }
        )
    return pairs


def predict_crossdoc(events: Sequence[Mapping]) -> list[list[str]]:
    """Cross-document clusters: groups of events sharing one normalized
    trigger across at least two documents. Members are ordered by
    (doc_id, char_start); clusters by their first member."""
    by_trigger: dict[str, list[Mapping]] = {}
    for ev in events:
        by_trigger.setdefault(normalize(ev["trigger_text"]), []).append(ev)
    clusters = []
    for members in by_trigger.values():
        if len(members) < 2 or len({m["doc_id"] for m in members}) < 2:
            continue
        ordered = sorted(members, key=lambda m: (m["doc_id"], m["char_start"]))
        clusters.append([m["event_id"] for m in ordered])
    clusters.sort()
    return clusters


def classify_ideology(text: str) -> dict:
    """Keyword polarization rule, identical to the pipeline's built-in
    scorer: polarized mass min(0.9, 0.15 * keyword count), split evenly."""
    count = sum(1 for token in _WORD.findall(text.lower()) if token in POLAR_WORDS)
    p_polar = min(POLAR_CAP, POLAR_WEIGHT * count)
    half = p_polar / 2.0
    return {"p_liberal": half, "p_center": 1.0 - p_polar, "p_conservative": half}
