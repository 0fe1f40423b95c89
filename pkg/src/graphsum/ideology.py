"""Keyword ideology scorer: the desk-scale stand-in for a trained article
ideology classifier.

Used by the evaluate stage when no model service is configured. The model
service's stub mode implements the identical rule, so fixture-file runs and
live-service runs produce the same polarization numbers. Keep the rule and
wordlist in sync with the service when changing either.
"""

from __future__ import annotations

from .metrics import IdeologyProbs, tokenize

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


def keyword_ideology_probs(text: str) -> IdeologyProbs:
    """Polarized mass grows with the count of polarizing keywords, split
    evenly between the liberal and conservative classes."""
    count = sum(1 for token in tokenize(text) if token in POLAR_WORDS)
    p_polar = min(POLAR_CAP, POLAR_WEIGHT * count)
    half = p_polar / 2.0
    return IdeologyProbs(p_liberal=half, p_center=1.0 - p_polar, p_conservative=half)
