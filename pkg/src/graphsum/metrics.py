"""Automatic summary evaluation.

Content preservation: Rouge-1/2/L/Lsum and cumulative BLEU-2 against a
reference summary. Bias: arousal sums over a valence-arousal-dominance
lexicon (lexical bias) and the polarization score from article-ideology
probabilities (informational bias). All scores live in their natural ranges
internally; the markdown report scales Rouge/BLEU/polarization by 100.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from math import exp, log
from pathlib import Path
from typing import Iterable, Mapping, Sequence

PROB_SUM_TOL = 1e-6

_WORD = re.compile(r"[a-z0-9]+")


class SchemaError(ValueError):
    """Malformed metric input (bad distribution, bad lexicon row)."""


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric word tokens; the tokenizer shared by every
    metric in this module."""
    return _WORD.findall(text.lower())


def split_sentences(text: str) -> list[str]:
    """Newline-separated sentences when newlines exist, otherwise split on
    terminal punctuation."""
    parts = [p.strip() for p in text.split("\n") if p.strip()]
    if len(parts) <= 1:
        joined = parts[0] if parts else ""
        parts = [p.strip() for p in re.split(r"(?<=[.!?])\s+", joined) if p.strip()]
    return parts


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(hyp: str, ref: str, n: int) -> float:
    """F1 of clipped n-gram overlap. 0 when either side has no n-grams."""
    hyp_counts = _ngrams(tokenize(hyp), n)
    ref_counts = _ngrams(tokenize(ref), n)
    total_hyp = sum(hyp_counts.values())
    total_ref = sum(ref_counts.values())
    if total_hyp == 0 or total_ref == 0:
        return 0.0
    overlap = sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
    return _f1(overlap / total_hyp, overlap / total_ref)


def _lcs_table(a: Sequence[str], b: Sequence[str]) -> list[list[int]]:
    rows = len(a), len(b)
    table = [[0] * (rows[1] + 1) for _ in range(rows[0] + 1)]
    for i in range(1, rows[0] + 1):
        for j in range(1, rows[1] + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    return _lcs_table(a, b)[len(a)][len(b)]


def _lcs_ref_indices(ref: Sequence[str], hyp: Sequence[str]) -> set[int]:
    """Reference-side indices of one LCS alignment.

    Backtrack rule (shared with the summary-level union): take the diagonal
    on a match; otherwise move up when strictly longer, else left.
    """
    if not ref or not hyp:
        return set()
    table = _lcs_table(ref, hyp)
    picked: set[int] = set()
    i, j = len(ref), len(hyp)
    while i > 0 and j > 0:
        if ref[i - 1] == hyp[j - 1]:
            picked.add(i - 1)
            i -= 1
            j -= 1
        elif table[i - 1][j] > table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return picked


def rouge_l(hyp: str, ref: str) -> float:
    """Sequence-level LCS F1 over whole texts."""
    hyp_tokens = tokenize(hyp)
    ref_tokens = tokenize(ref)
    if not hyp_tokens or not ref_tokens:
        return 0.0
    lcs = lcs_length(ref_tokens, hyp_tokens)
    return _f1(lcs / len(hyp_tokens), lcs / len(ref_tokens))


def rouge_lsum(hyp: str, ref: str) -> float:
    """Summary-level LCS F1: per reference sentence, the union of LCS hits
    against every hypothesis sentence, clipped by corpus token counts."""
    ref_sents = [tokenize(s) for s in split_sentences(ref)]
    hyp_sents = [tokenize(s) for s in split_sentences(hyp)]
    m = sum(len(s) for s in ref_sents)
    n = sum(len(s) for s in hyp_sents)
    if m == 0 or n == 0:
        return 0.0
    ref_budget = Counter(t for s in ref_sents for t in s)
    hyp_budget = Counter(t for s in hyp_sents for t in s)
    hits = 0
    for sent in ref_sents:
        union: set[int] = set()
        for hyp_sent in hyp_sents:
            union |= _lcs_ref_indices(sent, hyp_sent)
        for idx in sorted(union):
            token = sent[idx]
            if ref_budget[token] > 0 and hyp_budget[token] > 0:
                hits += 1
                ref_budget[token] -= 1
                hyp_budget[token] -= 1
    return _f1(hits / n, hits / m)


def bleu2(hyp: str, ref: str, smooth: bool = False) -> float:
    """Cumulative BLEU-2: brevity penalty times the geometric mean of clipped
    unigram and bigram precision (weights 0.5 / 0.5).

    Unsmoothed scores are 0 whenever either precision is 0, including
    hypotheses shorter than two tokens; smooth=True applies add-one
    smoothing to both precisions instead.
    """
    hyp_tokens = tokenize(hyp)
    ref_tokens = tokenize(ref)
    if not hyp_tokens or not ref_tokens:
        return 0.0
    precisions = []
    for n in (1, 2):
        hyp_counts = _ngrams(hyp_tokens, n)
        ref_counts = _ngrams(ref_tokens, n)
        total = sum(hyp_counts.values())
        overlap = sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
        if smooth:
            precisions.append((overlap + 1.0) / (total + 1.0))
        else:
            if total == 0 or overlap == 0:
                return 0.0
            precisions.append(overlap / total)
    bp = 1.0 if len(hyp_tokens) >= len(ref_tokens) else exp(1.0 - len(ref_tokens) / len(hyp_tokens))
    return bp * exp(0.5 * log(precisions[0]) + 0.5 * log(precisions[1]))


# ---------------------------------------------------------------------------
# Lexical bias: arousal sums over a VAD lexicon.
# ---------------------------------------------------------------------------

V_POS_DEFAULT = 0.65
V_NEG_DEFAULT = 0.35


@dataclass(frozen=True)
class VadLexicon:
    """word -> (valence, arousal, dominance), every value in [0, 1]."""

    entries: Mapping[str, tuple[float, float, float]]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, word: str) -> tuple[float, float, float] | None:
        return self.entries.get(word)


def load_vad_lexicon(path: str | Path) -> VadLexicon:
    """Parse a tab-separated word/valence/arousal/dominance file. A header
    line is tolerated; keys are lowercased; values must be in [0, 1]."""
    entries: dict[str, tuple[float, float, float]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise SchemaError(f"lexicon line {lineno}: expected 4 tab-separated fields")
        word = parts[0].lower()
        try:
            vad = tuple(float(x) for x in parts[1:])
        except ValueError:
            if lineno == 1:
                continue  # header
            raise SchemaError(f"lexicon line {lineno}: non-numeric VAD values") from None
        if any(x < 0.0 or x > 1.0 for x in vad):
            raise SchemaError(f"lexicon line {lineno}: VAD values outside [0, 1]")
        entries[word] = vad
    return VadLexicon(entries)


@dataclass(frozen=True)
class ArousalScores:
    p_arousal: float
    n_arousal: float

    @property
    def sum_arousal(self) -> float:
        return self.p_arousal + self.n_arousal


def arousal(
    summary: str,
    lexicon: VadLexicon,
    v_pos: float = V_POS_DEFAULT,
    v_neg: float = V_NEG_DEFAULT,
) -> ArousalScores:
    """Sum arousal over positive-valence tokens (valence >= v_pos) and over
    negative-valence tokens (valence <= v_neg). Tokens missing from the
    lexicon contribute nothing."""
    if not 0.0 <= v_neg < v_pos <= 1.0:
        raise SchemaError(f"invalid valence thresholds v_neg={v_neg}, v_pos={v_pos}")
    p_total = 0.0
    n_total = 0.0
    for token in tokenize(summary):
        vad = lexicon.get(token)
        if vad is None:
            continue
        valence, arousal_value, _ = vad
        if valence >= v_pos:
            p_total += arousal_value
        elif valence <= v_neg:
            n_total += arousal_value
    return ArousalScores(p_arousal=p_total, n_arousal=n_total)


# ---------------------------------------------------------------------------
# Informational bias: polarization score.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdeologyProbs:
    """Article-ideology distribution over (liberal, center, conservative)."""

    p_liberal: float
    p_center: float
    p_conservative: float

    def __post_init__(self):
        probs = (self.p_liberal, self.p_center, self.p_conservative)
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise SchemaError(f"ideology probabilities outside [0, 1]: {probs}")
        if abs(sum(probs) - 1.0) > PROB_SUM_TOL:
            raise SchemaError(f"ideology probabilities sum to {sum(probs)}, not 1")


def polarization(probs: IdeologyProbs) -> float:
    """Probability mass on the polarized classes: 1 minus the center-class
    probability, clamped into [0, 1]."""
    return min(1.0, max(0.0, 1.0 - probs.p_center))


# ---------------------------------------------------------------------------
# Per-summary records and the corpus report.
# ---------------------------------------------------------------------------

METRIC_FIELDS = (
    "rouge1",
    "rouge2",
    "rougeL",
    "rougeLsum",
    "bleu2",
    "polarization",
    "p_arousal",
    "n_arousal",
    "sum_arousal",
)


@dataclass(frozen=True)
class SummaryScores:
    cluster_id: str
    rouge1: float
    rouge2: float
    rougeL: float
    rougeLsum: float
    bleu2: float
    polarization: float
    p_arousal: float
    n_arousal: float

    @property
    def sum_arousal(self) -> float:
        return self.p_arousal + self.n_arousal

    def as_dict(self) -> dict:
        d = {"cluster_id": self.cluster_id}
        d.update({name: getattr(self, name) for name in METRIC_FIELDS})
        return d


@dataclass(frozen=True)
class EvalReport:
    records: tuple[SummaryScores, ...]
    means: dict[str, float] = field(default_factory=dict)


def score_summary(
    cluster_id: str,
    summary: str,
    reference: str,
    lexicon: VadLexicon,
    ideology: IdeologyProbs,
    v_pos: float = V_POS_DEFAULT,
    v_neg: float = V_NEG_DEFAULT,
) -> SummaryScores:
    scores = arousal(summary, lexicon, v_pos=v_pos, v_neg=v_neg)
    return SummaryScores(
        cluster_id=cluster_id,
        rouge1=rouge_n(summary, reference, 1),
        rouge2=rouge_n(summary, reference, 2),
        rougeL=rouge_l(summary, reference),
        rougeLsum=rouge_lsum(summary, reference),
        bleu2=bleu2(summary, reference),
        polarization=polarization(ideology),
        p_arousal=scores.p_arousal,
        n_arousal=scores.n_arousal,
    )


def build_report(records: Sequence[SummaryScores]) -> EvalReport:
    """Aggregate per-summary records into corpus means."""
    records = tuple(records)
    if not records:
        return EvalReport(records=(), means={})
    means = {
        name: sum(getattr(r, name) for r in records) / len(records) for name in METRIC_FIELDS
    }
    return EvalReport(records=records, means=means)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "records": [r.as_dict() for r in report.records],
        "means": dict(report.means),
    }


def report_dumps(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n"


_MD_COLUMNS = (
    ("Rouge-1", "rouge1", 100.0),
    ("Rouge-2", "rouge2", 100.0),
    ("Rouge-L", "rougeL", 100.0),
    ("Rouge-Lsum", "rougeLsum", 100.0),
    ("BLEU-2", "bleu2", 100.0),
    ("polarization", "polarization", 100.0),
    ("p-arousal", "p_arousal", 1.0),
    ("n-arousal", "n_arousal", 1.0),
    ("sum-arousal", "sum_arousal", 1.0),
)


def report_to_markdown(report: EvalReport) -> str:
    """Markdown table, content metrics first then bias metrics. Rouge, BLEU,
    and polarization are scaled by 100; arousal sums stay raw."""
    header = "| cluster | " + " | ".join(name for name, _, _ in _MD_COLUMNS) + " |"
    rule = "|---" * (len(_MD_COLUMNS) + 1) + "|"
    lines = [header, rule]
    rows: list[tuple[str, SummaryScores | dict]] = [(r.cluster_id, r) for r in report.records]
    for label, record in rows:
        cells = [f"{getattr(record, attr) * scale:.2f}" for _, attr, scale in _MD_COLUMNS]
        lines.append("| " + label + " | " + " | ".join(cells) + " |")
    if report.means:
        cells = [f"{report.means[attr] * scale:.2f}" for _, attr, scale in _MD_COLUMNS]
        lines.append("| mean | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
