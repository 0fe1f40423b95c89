"""A frozen mock language model for desk-scale soft-prompt training.

The real system would feed the projected graph embedding into the attention
stack of a frozen LLM. Providers expose no embedding-level interface, so the
toy harness substitutes a fixed linear-attention readout over the sequence
[soft prompt ; text embeddings]. Its parameters never receive updates; it
only supplies a differentiable path from the soft prompt to a scalar loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gat import LossSpec, hash_vector
from .metrics import tokenize


class MockLM:
    """Fixed-parameter attention readout. Deterministic for a given seed."""

    def __init__(self, d_llm: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.d_llm = d_llm
        # The value map runs hotter than 1/sqrt(d) so the readout stays
        # sensitive to the prompt row; descent at toy step sizes would
        # otherwise crawl.
        self.key_map = rng.normal(0.0, 1.0 / np.sqrt(d_llm), size=(d_llm, d_llm))
        self.value_map = rng.normal(0.0, 3.0 / np.sqrt(d_llm), size=(d_llm, d_llm))
        self.query = rng.normal(0.0, 1.0, size=d_llm)

    def embed_text(self, text: str) -> np.ndarray:
        """Hash-derived token embeddings standing in for the text embedding
        layer of a pretrained model."""
        tokens = tokenize(text)
        if not tokens:
            return np.zeros((0, self.d_llm))
        return np.stack([hash_vector(tok, self.d_llm) for tok in tokens])

    def readout(self, soft_prompt: np.ndarray, text_emb: np.ndarray) -> tuple[np.ndarray, dict]:
        """Attention over [soft_prompt ; text_emb] with the frozen query."""
        seq = np.vstack([soft_prompt[None, :], text_emb])
        keys = seq @ self.key_map.T
        scores = keys @ self.query / np.sqrt(self.d_llm)
        shifted = np.exp(scores - scores.max())
        attn = shifted / shifted.sum()
        values = seq @ self.value_map.T
        out = attn @ values
        cache = {"seq": seq, "attn": attn, "values": values}
        return out, cache

    def readout_grad(self, cache: dict, grad_out: np.ndarray) -> np.ndarray:
        """dL/d(soft prompt), the only input that is trainable upstream."""
        attn, values, seq = cache["attn"], cache["values"], cache["seq"]
        d_attn = values @ grad_out
        d_scores = attn * (d_attn - attn @ d_attn)
        # Soft prompt is row 0 of the sequence; it feeds its own key and value.
        g_seq0 = attn[0] * (self.value_map.T @ grad_out)
        g_seq0 += d_scores[0] / np.sqrt(self.d_llm) * (self.key_map.T @ self.query)
        return g_seq0


@dataclass
class ReadoutLoss(LossSpec):
    """Squared distance between the frozen readout and a target vector."""

    lm: MockLM
    text_emb: np.ndarray
    target: np.ndarray

    def value_and_grad(self, soft_prompt: np.ndarray) -> tuple[float, np.ndarray]:
        out, cache = self.lm.readout(soft_prompt, self.text_emb)
        diff = out - self.target
        return float(diff @ diff), self.lm.readout_grad(cache, 2.0 * diff)
