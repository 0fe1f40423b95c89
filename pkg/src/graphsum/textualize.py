"""Graph textualization: event table, relation table, and hard prompts.

A graph is flattened into two pipe-delimited tables (events and relations)
that slot into instruction templates as a natural-language description of the
graph. Rendering is byte-stable; parse_tables inverts it exactly, which the
round-trip tests rely on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .graph import MultiDocGraph, MoralLabel, RELATION_INDEX, RelationLabel

EVENT_HEADER = "event id | event word | moral attribute"
RELATION_HEADER = "source event id | source event word | relation | target event id | target event word"

# Surface forms of the relation labels as they appear in relation rows.
RELATION_WORDS = {
    RelationLabel.COREFERENCE: "coreference",
    RelationLabel.BEFORE: "before",
    RelationLabel.AFTER: "after",
    RelationLabel.OVERLAP: "overlap",
    RelationLabel.CAUSES: "causes",
    RelationLabel.CAUSED_BY: "caused by",
    RelationLabel.CONTAINS: "contains",
    RelationLabel.CONTAINED_BY: "contained by",
}
WORD_TO_RELATION = {w: r for r, w in RELATION_WORDS.items()}

ARTICLE_SEPARATOR = " /s "


class TemplateError(ValueError):
    """A template placeholder could not be resolved."""


class TableParseError(ValueError):
    """A prompt's table section is malformed."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


@dataclass(frozen=True)
class GraphTables:
    """The textualized graph: ordered event rows and relation rows."""

    event_rows: tuple[tuple[str, str, str], ...]
    relation_rows: tuple[tuple[str, str, str, str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "event_rows", tuple(tuple(r) for r in self.event_rows))
        object.__setattr__(self, "relation_rows", tuple(tuple(r) for r in self.relation_rows))


def moral_surface(label: MoralLabel) -> str:
    """non_moral renders as "objective"; moral labels keep their lowercase name."""
    return "objective" if label is MoralLabel.NON_MORAL else label.value


def surface_to_moral(surface: str) -> MoralLabel:
    return MoralLabel.NON_MORAL if surface == "objective" else MoralLabel(surface)


def tabulate(graph: MultiDocGraph) -> GraphTables:
    """Flatten a graph into its event and relation tables.

    Event rows follow (document order in cluster, char_start); relation rows
    follow (source id, canonical label order, target id).
    """
    events = graph.events_by_id()
    event_rows = []
    for doc in graph.documents:
        for ev in graph.events_of_doc(doc.doc_id):
            event_rows.append((ev.event_id, ev.trigger_text, moral_surface(ev.moral)))

    ordered = sorted(graph.relations, key=lambda r: (r.source, RELATION_INDEX[r.label], r.target))
    relation_rows = []
    for rel in ordered:
        src, tgt = events[rel.source], events[rel.target]
        relation_rows.append(
            (rel.source, src.trigger_text, RELATION_WORDS[rel.label], rel.target, tgt.trigger_text)
        )
    return GraphTables(event_rows=tuple(event_rows), relation_rows=tuple(relation_rows))


def _cell(text: str) -> str:
    # Pipes and newlines would break the row grammar; collapse them to spaces.
    return re.sub(r"[|\r\n]", " ", text)


def serialize_event_table(tables: GraphTables) -> str:
    lines = [EVENT_HEADER]
    lines += [" | ".join(_cell(c) for c in row) for row in tables.event_rows]
    return "\n".join(lines)


def serialize_relation_table(tables: GraphTables) -> str:
    lines = [RELATION_HEADER]
    lines += [" | ".join(_cell(c) for c in row) for row in tables.relation_rows]
    return "\n".join(lines)


@dataclass(frozen=True)
class PromptTemplate:
    """A raw instruction template with <...> placeholders."""

    name: str
    text: str


@dataclass(frozen=True)
class OneShotExample:
    """Demonstration triple for the one-shot and chain-of-thought templates."""

    articles: tuple[str, ...]
    summary: str
    explanation: str = ""


_TEMPLATE_DIR = resources.files("graphsum") / "templates"
TEMPLATE_NAMES = ("baseline", "graph", "one_shot", "cot_graph")


def load_template(name: str, directory: str | Path | None = None) -> PromptTemplate:
    """Load a named template from the bundled set or an override directory."""
    if directory is not None:
        path = Path(directory) / f"{name}.txt"
        if not path.is_file():
            raise TemplateError(f"template file not found: {path}")
        return PromptTemplate(name=name, text=path.read_text(encoding="utf-8"))
    candidate = _TEMPLATE_DIR / f"{name}.txt"
    try:
        return PromptTemplate(name=name, text=candidate.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TemplateError(f"unknown template {name!r}; bundled: {TEMPLATE_NAMES}") from None


_ARTICLE_SERIES = re.compile(r"<article 1>(?: /s <article \d+>)*")
_EXAMPLE_SERIES = re.compile(r"<example article 1>(?: /s <example article \d+>)*")
_PLACEHOLDER = re.compile(r"<[^<>\n]+>")


def render_hard_prompt(
    tables: GraphTables | None,
    articles: Sequence[str],
    template: PromptTemplate,
    example: OneShotExample | None = None,
) -> str:
    """Fill a template with articles, serialized tables, and the optional
    one-shot example. Articles are joined by the literal " /s " separator;
    the table placeholders expand to newline-framed pipe tables.

    Raises TemplateError if any placeholder cannot be resolved.
    """
    if not articles:
        raise TemplateError("at least one article is required")
    text = template.text
    text = _ARTICLE_SERIES.sub(lambda _: ARTICLE_SEPARATOR.join(articles), text)
    if example is not None:
        text = _EXAMPLE_SERIES.sub(lambda _: ARTICLE_SEPARATOR.join(example.articles), text)
        text = text.replace("<example summary>", example.summary)
        text = text.replace(
            "<explanation of events and event relations in the example articles>", example.explanation
        )
    if tables is not None:
        text = text.replace("<event table>", "\n" + serialize_event_table(tables) + "\n")
        text = text.replace("<event relation table>", "\n" + serialize_relation_table(tables) + "\n")
    unresolved = _PLACEHOLDER.search(text)
    if unresolved:
        raise TemplateError(f"unresolved placeholder {unresolved.group(0)!r} in template {template.name!r}")
    return text


def _parse_rows(lines: list[str], start: int, width: int) -> tuple[list[tuple], int]:
    rows = []
    i = start
    while i < len(lines):
        parts = lines[i].split(" | ")
        if len(parts) != width:
            break
        rows.append(tuple(parts))
        i += 1
    return rows, i


def parse_tables(prompt_text: str) -> GraphTables:
    """Recover the GraphTables embedded in a rendered prompt.

    Inverse of render_hard_prompt for any template carrying both table
    placeholders. Raises TableParseError (with a line number) when a header
    is missing or the sections are out of order.
    """
    lines = prompt_text.split("\n")
    try:
        event_at = lines.index(EVENT_HEADER)
    except ValueError:
        raise TableParseError("event table header not found", 1) from None
    event_rows, after_events = _parse_rows(lines, event_at + 1, 3)
    try:
        relation_at = lines.index(RELATION_HEADER, after_events)
    except ValueError:
        raise TableParseError("relation table header not found", after_events + 1) from None
    relation_rows, _ = _parse_rows(lines, relation_at + 1, 5)
    for n, row in enumerate(relation_rows):
        if row[2] not in WORD_TO_RELATION:
            raise TableParseError(f"unknown relation word {row[2]!r}", relation_at + 2 + n)
    return GraphTables(event_rows=tuple(event_rows), relation_rows=tuple(relation_rows))
