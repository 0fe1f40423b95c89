#!/usr/bin/env python3
"""Regenerate the pipeline's fixture prediction files from the stub rules.

Reads cluster files from the repository's tests/fixtures/clusters directory
and writes one prediction file per document plus a cross-doc file per
cluster, exactly as the stub service would answer. Run from anywhere:

    python3 service/scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from modelservice import stubs

REPO = Path(__file__).resolve().parents[2]
CLUSTERS = REPO / "tests" / "fixtures" / "clusters"
PREDICTIONS = REPO / "tests" / "fixtures" / "predictions"

_TOKEN_RUN = re.compile(r"\S+")


def word_spans(text: str) -> list[list[int]]:
    return [[m.start(), m.end()] for m in _TOKEN_RUN.finditer(text)]


def decode_events(doc: dict, event_preds: list[dict], doc_index: int) -> list[dict]:
    """Argmax decoding mirroring the pipeline's rule (tie -> non-event),
    with the same synthetic id scheme (doc index + ordinal)."""
    events = []
    for pred in event_preds:
        if pred["p_event"] > pred["p_non_event"]:
            start, end = doc["token_spans"][pred["token_index"]]
            events.append(
                {
                    "event_id": f"d{doc_index}_e{len(events)}",
                    "doc_id": doc["doc_id"],
                    "trigger_text": doc["text"][start:end],
                    "char_start": start,
                }
            )
    return events


def main() -> None:
    for cluster_file in sorted(CLUSTERS.glob("*.json")):
        cluster = json.loads(cluster_file.read_text(encoding="utf-8"))
        cid = cluster["cluster_id"]
        out_dir = PREDICTIONS / cid
        out_dir.mkdir(parents=True, exist_ok=True)
        all_events = []
        for doc_index, doc in enumerate(cluster["documents"]):
            doc = dict(doc)
            doc.setdefault("token_spans", word_spans(doc["text"]))
            event_preds = stubs.predict_events(doc)
            events = decode_events(doc, event_preds, doc_index)
            all_events.extend(events)
            payload = {
                "doc_id": doc["doc_id"],
                "events": event_preds,
                "morals": stubs.predict_morals(events),
                "pairs": stubs.predict_relations(events),
            }
            path = out_dir / f"{doc['doc_id']}.json"
            path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
            print(f"wrote {path}")
        crossdoc = {"cluster_id": cid, "clusters": stubs.predict_crossdoc(all_events)}
        path = out_dir / "crossdoc.json"
        path.write_text(json.dumps(crossdoc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
