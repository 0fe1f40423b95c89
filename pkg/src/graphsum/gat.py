"""Relation-aware graph attention encoder and its exact gradients.

The encoder fuses moral attributes into node embeddings, runs n_layers of
relation-aware attention (one neighborhood per relation label, uniformly
averaged over all 8 labels), pools nodes into a graph embedding through a
standard attention read-out with a virtual graph node, and projects the
result into the hidden width of a target language model (the soft prompt).

Everything is plain numpy at 64-bit precision. The backward pass is written
by hand and is checked against central finite differences in the test suite;
keep forward and backward in lockstep when editing either.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .graph import MORAL_ORDER, MultiDocGraph, RELATION_ORDER, RelationLabel

N_RELATIONS = len(RELATION_ORDER)  # 8, the fixed divisor of the per-node aggregation
N_MORALS = len(MORAL_ORDER)  # 11
LEAKY_SLOPE = 0.2


class NumericError(ArithmeticError):
    """A forward intermediate went NaN/Inf; the message names the location."""


class TrainingDivergedError(RuntimeError):
    """Toy training loss exceeded the divergence bound."""


@dataclass(frozen=True)
class EncoderConfig:
    d_node: int = 8
    d_rel: int = 8
    d_k: int = 8
    n_layers: int = 2
    d_llm: int = 16
    seed: int = 0
    scale_attention: bool = False

    def __post_init__(self):
        for name in ("d_node", "d_rel", "d_k", "n_layers", "d_llm"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class LayerParams:
    w_rel: np.ndarray  # (d_rel, 2*d_node + d_rel)
    w_q: np.ndarray  # (d_k, d_node)
    w_k: np.ndarray  # (d_k, d_rel)
    w_v: np.ndarray  # (d_node, d_rel)


@dataclass
class EncoderParams:
    """All trainable arrays. Shapes are pinned by EncoderConfig; the moral
    and relation embedding tables are trained together with the weights."""

    w_moral: np.ndarray  # (d_node, 2*d_node)
    b_moral: np.ndarray  # (d_node,)
    moral_emb: np.ndarray  # (11, d_node)
    rel_emb: np.ndarray  # (8, d_rel)
    layers: list[LayerParams]
    w_graph: np.ndarray  # (d_node, d_node)
    a_graph: np.ndarray  # (2*d_node,)
    w_proj1: np.ndarray  # (d_node, d_node)
    b_proj1: np.ndarray  # (d_node,)
    w_proj2: np.ndarray  # (d_llm, d_node)
    b_proj2: np.ndarray  # (d_llm,)

    def blocks(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "w_moral", self.w_moral
        yield "b_moral", self.b_moral
        yield "moral_emb", self.moral_emb
        yield "rel_emb", self.rel_emb
        for i, layer in enumerate(self.layers):
            yield f"layers.{i}.w_rel", layer.w_rel
            yield f"layers.{i}.w_q", layer.w_q
            yield f"layers.{i}.w_k", layer.w_k
            yield f"layers.{i}.w_v", layer.w_v
        yield "w_graph", self.w_graph
        yield "a_graph", self.a_graph
        yield "w_proj1", self.w_proj1
        yield "b_proj1", self.b_proj1
        yield "w_proj2", self.w_proj2
        yield "b_proj2", self.b_proj2

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(
            w_moral=np.zeros_like(self.w_moral),
            b_moral=np.zeros_like(self.b_moral),
            moral_emb=np.zeros_like(self.moral_emb),
            rel_emb=np.zeros_like(self.rel_emb),
            layers=[
                LayerParams(
                    w_rel=np.zeros_like(l.w_rel),
                    w_q=np.zeros_like(l.w_q),
                    w_k=np.zeros_like(l.w_k),
                    w_v=np.zeros_like(l.w_v),
                )
                for l in self.layers
            ],
            w_graph=np.zeros_like(self.w_graph),
            a_graph=np.zeros_like(self.a_graph),
            w_proj1=np.zeros_like(self.w_proj1),
            b_proj1=np.zeros_like(self.b_proj1),
            w_proj2=np.zeros_like(self.w_proj2),
            b_proj2=np.zeros_like(self.b_proj2),
        )

    def copy(self) -> "EncoderParams":
        out = self.zeros_like()
        for (_, dst), (_, src) in zip(out.blocks(), self.blocks()):
            dst += src
        return out

    def add_scaled(self, other: "EncoderParams", factor: float) -> None:
        for (_, dst), (_, src) in zip(self.blocks(), other.blocks()):
            dst += factor * src

    def scale(self, factor: float) -> None:
        for _, arr in self.blocks():
            arr *= factor


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_params(config: EncoderConfig) -> EncoderParams:
    """Seeded uniform Glorot for matrices and embedding tables, zeros for
    biases, small uniform for the attention vector."""
    rng = np.random.default_rng(config.seed)
    d_n, d_r, d_k = config.d_node, config.d_rel, config.d_k
    layers = [
        LayerParams(
            w_rel=_glorot(rng, d_r, 2 * d_n + d_r),
            w_q=_glorot(rng, d_k, d_n),
            w_k=_glorot(rng, d_k, d_r),
            w_v=_glorot(rng, d_n, d_r),
        )
        for _ in range(config.n_layers)
    ]
    return EncoderParams(
        w_moral=_glorot(rng, d_n, 2 * d_n),
        b_moral=np.zeros(d_n),
        moral_emb=_glorot(rng, N_MORALS, d_n),
        rel_emb=_glorot(rng, N_RELATIONS, d_r),
        layers=layers,
        w_graph=_glorot(rng, d_n, d_n),
        a_graph=rng.uniform(-0.5, 0.5, size=2 * d_n),
        w_proj1=_glorot(rng, d_n, d_n),
        b_proj1=np.zeros(d_n),
        w_proj2=_glorot(rng, config.d_llm, d_n),
        b_proj2=np.zeros(config.d_llm),
    )


# ---------------------------------------------------------------------------
# Node initialization providers.
# ---------------------------------------------------------------------------

NodeInitProvider = Callable[[MultiDocGraph, int], np.ndarray]


def hash_vector(text: str, d: int, scale: float = 1.0) -> np.ndarray:
    """Deterministic pseudo-embedding of a string: the digest of the text
    seeds a generator that draws a uniform vector. Identical words map to
    identical vectors, standing in for shared word embeddings."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    return rng.uniform(-1.0, 1.0, size=d) * scale


def hash_node_init(graph: MultiDocGraph, d_node: int) -> np.ndarray:
    """One hash vector per event, keyed by the lowercased trigger word."""
    if not graph.events:
        return np.zeros((0, d_node))
    return np.stack([hash_vector(ev.trigger_text.lower(), d_node) for ev in graph.events])


# ---------------------------------------------------------------------------
# Forward pass.
# ---------------------------------------------------------------------------


def relation_pairs(graph: MultiDocGraph) -> dict[RelationLabel, tuple[np.ndarray, np.ndarray]]:
    """Directed neighbor pairs per relation label, as (source, neighbor)
    node-index arrays. A stored edge (i -> j, r) puts j into i's
    r-neighborhood; coreference additionally contributes the reverse pair
    because it is symmetric, while the directed families already encode both
    orientations as separate labels."""
    index = {ev.event_id: k for k, ev in enumerate(graph.events)}
    pair_sets: dict[RelationLabel, set[tuple[int, int]]] = {r: set() for r in RELATION_ORDER}
    for rel in graph.relations:
        i, j = index[rel.source], index[rel.target]
        pair_sets[rel.label].add((i, j))
        if rel.label is RelationLabel.COREFERENCE:
            pair_sets[rel.label].add((j, i))
    out = {}
    for label, pairs in pair_sets.items():
        ordered = sorted(pairs)
        srcs = np.array([p[0] for p in ordered], dtype=np.intp)
        dsts = np.array([p[1] for p in ordered], dtype=np.intp)
        out[label] = (srcs, dsts)
    return out


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


def _group_positions(srcs: np.ndarray) -> dict[int, np.ndarray]:
    groups: dict[int, list[int]] = {}
    for pos, src in enumerate(srcs):
        groups.setdefault(int(src), []).append(pos)
    return {k: np.array(v, dtype=np.intp) for k, v in groups.items()}


@dataclass
class _RelationCache:
    srcs: np.ndarray
    dsts: np.ndarray
    groups: dict[int, np.ndarray]
    u: np.ndarray
    rho: np.ndarray
    k: np.ndarray
    scores: np.ndarray
    alpha: np.ndarray
    v: np.ndarray


@dataclass
class _LayerCache:
    e_prev: np.ndarray
    h_prev: np.ndarray
    q: np.ndarray
    relations: dict[RelationLabel, _RelationCache]
    w_nodes: np.ndarray
    w_g: np.ndarray
    z: np.ndarray
    t: np.ndarray
    beta: np.ndarray


@dataclass
class ForwardResult:
    """Layer-wise node embeddings, graph embeddings, and the soft prompt.

    attention_groups collects every softmax weight vector of the pass (all
    relation neighborhoods plus the graph read-out of each layer) so tests
    can assert normalization directly.
    """

    node_layers: list[np.ndarray]
    graph_layers: list[np.ndarray]
    soft_prompt: np.ndarray
    attention_groups: list[np.ndarray]
    _fused_input: np.ndarray = field(repr=False, default=None)
    _layer_caches: list[_LayerCache] = field(repr=False, default_factory=list)
    _proj_hidden: np.ndarray = field(repr=False, default=None)

    @property
    def graph_embedding(self) -> np.ndarray:
        return self.graph_layers[-1]


def _require_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {where}")


def fuse_moral(e_i: np.ndarray, moral_index: int, params: EncoderParams) -> np.ndarray:
    """Moral fusion for a single node: W_m (e_i ++ moral_embedding) + b_m."""
    combined = np.concatenate([e_i, params.moral_emb[moral_index]])
    return params.w_moral @ combined + params.b_moral


def forward(
    graph: MultiDocGraph,
    init: np.ndarray,
    params: EncoderParams,
    config: EncoderConfig,
) -> ForwardResult:
    """Full encoder pass. init is an (n_events, d_node) matrix from a
    node-init provider; rows follow graph.events order."""
    n = len(graph.events)
    d_n = config.d_node
    if init.shape != (n, d_n):
        raise ValueError(f"init shape {init.shape} != ({n}, {d_n})")
    scale = 1.0 / np.sqrt(config.d_k) if config.scale_attention else 1.0

    moral_idx = np.array([MORAL_ORDER.index(ev.moral) for ev in graph.events], dtype=np.intp)
    if n:
        fused_input = np.hstack([init, params.moral_emb[moral_idx]])
        e = fused_input @ params.w_moral.T + params.b_moral
        h = e.mean(axis=0)
    else:
        fused_input = np.zeros((0, 2 * d_n))
        e = np.zeros((0, d_n))
        h = np.zeros(d_n)
    _require_finite(e, "moral fusion")

    pairs = relation_pairs(graph)
    a1, a2 = params.a_graph[:d_n], params.a_graph[d_n:]

    node_layers = [e]
    graph_layers = [h]
    caches: list[_LayerCache] = []
    attention_groups: list[np.ndarray] = []

    for l, layer in enumerate(params.layers, start=1):
        e_prev, h_prev = node_layers[-1], graph_layers[-1]
        q = e_prev @ layer.w_q.T if n else np.zeros((0, config.d_k))
        rel_caches: dict[RelationLabel, _RelationCache] = {}
        e_new = np.zeros((n, d_n))
        for r_index, label in enumerate(RELATION_ORDER):
            srcs, dsts = pairs[label]
            if srcs.size == 0:
                continue
            base = params.rel_emb[r_index]
            u = np.hstack([e_prev[srcs], np.tile(base, (srcs.size, 1)), e_prev[dsts]])
            rho = u @ layer.w_rel.T
            k = rho @ layer.w_k.T
            scores = np.einsum("md,md->m", q[srcs], k) * scale
            _require_finite(scores, f"attention scores, layer {l}, relation {label.value}")
            alpha = np.empty_like(scores)
            groups = _group_positions(srcs)
            for node, positions in groups.items():
                alpha[positions] = _softmax(scores[positions])
                attention_groups.append(alpha[positions])
            v = rho @ layer.w_v.T
            np.add.at(e_new, srcs, alpha[:, None] * v)
            rel_caches[label] = _RelationCache(srcs, dsts, groups, u, rho, k, scores, alpha, v)
        e_new /= N_RELATIONS
        _require_finite(e_new, f"node embeddings, layer {l}")

        # Graph read-out: attention from the virtual graph node over events.
        if n:
            w_nodes = e_prev @ params.w_graph.T
            w_g = params.w_graph @ h_prev
            z = (a1 @ w_g) + w_nodes @ a2
            t = np.where(z > 0, z, LEAKY_SLOPE * z)
            beta = _softmax(t)
            attention_groups.append(beta)
            h_new = beta @ w_nodes
        else:
            w_nodes = np.zeros((0, d_n))
            w_g = np.zeros(d_n)
            z = t = beta = np.zeros(0)
            h_new = h_prev
        _require_finite(h_new, f"graph embedding, layer {l}")

        caches.append(_LayerCache(e_prev, h_prev, q, rel_caches, w_nodes, w_g, z, t, beta))
        node_layers.append(e_new)
        graph_layers.append(h_new)

    h_g = graph_layers[-1]
    proj_hidden = params.w_proj1 @ h_g + params.b_proj1
    soft_prompt = params.w_proj2 @ proj_hidden + params.b_proj2
    _require_finite(soft_prompt, "projection")

    return ForwardResult(
        node_layers=node_layers,
        graph_layers=graph_layers,
        soft_prompt=soft_prompt,
        attention_groups=attention_groups,
        _fused_input=fused_input,
        _layer_caches=caches,
        _proj_hidden=proj_hidden,
    )


# ---------------------------------------------------------------------------
# Backward pass.
# ---------------------------------------------------------------------------


def _softmax_backward(alpha: np.ndarray, d_alpha: np.ndarray) -> np.ndarray:
    return alpha * (d_alpha - alpha @ d_alpha)


def backward(
    graph: MultiDocGraph,
    result: ForwardResult,
    params: EncoderParams,
    config: EncoderConfig,
    grad_soft_prompt: np.ndarray,
) -> EncoderParams:
    """Exact reverse-mode gradients of a scalar loss with respect to every
    parameter block, given dL/d(soft prompt). Mirrors forward() step for
    step in reverse order."""
    n = len(graph.events)
    d_n, d_r = config.d_node, config.d_rel
    scale = 1.0 / np.sqrt(config.d_k) if config.scale_attention else 1.0
    grads = params.zeros_like()

    h_g = result.graph_layers[-1]
    grads.w_proj2 += np.outer(grad_soft_prompt, result._proj_hidden)
    grads.b_proj2 += grad_soft_prompt
    g_hidden = params.w_proj2.T @ grad_soft_prompt
    grads.w_proj1 += np.outer(g_hidden, h_g)
    grads.b_proj1 += g_hidden
    g_h = params.w_proj1.T @ g_hidden

    g_h_layers = [np.zeros(d_n) for _ in result.graph_layers]
    g_e_layers = [np.zeros((n, d_n)) for _ in result.node_layers]
    g_h_layers[-1] = g_h

    a1, a2 = params.a_graph[:d_n], params.a_graph[d_n:]

    for l in range(len(params.layers), 0, -1):
        cache = result._layer_caches[l - 1]
        layer = params.layers[l - 1]
        e_prev = cache.e_prev

        # Graph read-out backward.
        g_h_new = g_h_layers[l]
        if n:
            d_beta = cache.w_nodes @ g_h_new
            g_w_nodes = np.outer(cache.beta, g_h_new)
            d_t = _softmax_backward(cache.beta, d_beta)
            d_z = d_t * np.where(cache.z > 0, 1.0, LEAKY_SLOPE)
            grads.a_graph[:d_n] += d_z.sum() * cache.w_g
            grads.a_graph[d_n:] += cache.w_nodes.T @ d_z
            g_w_nodes += np.outer(d_z, a2)
            g_wg = d_z.sum() * a1
            grads.w_graph += np.outer(g_wg, cache.h_prev)
            g_h_layers[l - 1] += params.w_graph.T @ g_wg
            grads.w_graph += g_w_nodes.T @ e_prev
            g_e_layers[l - 1] += g_w_nodes @ params.w_graph
        else:
            g_h_layers[l - 1] += g_h_new

        # Relation attention backward.
        g_e_new = g_e_layers[l] / N_RELATIONS
        g_q_total = np.zeros_like(cache.q)
        for r_index, label in enumerate(RELATION_ORDER):
            rc = cache.relations.get(label)
            if rc is None:
                continue
            g_av = g_e_new[rc.srcs]
            d_alpha = np.einsum("md,md->m", g_av, rc.v)
            g_v = rc.alpha[:, None] * g_av
            d_scores = np.empty_like(rc.scores)
            for node, positions in rc.groups.items():
                d_scores[positions] = _softmax_backward(rc.alpha[positions], d_alpha[positions])
            d_scores *= scale
            np.add.at(g_q_total, rc.srcs, d_scores[:, None] * rc.k)
            g_k = d_scores[:, None] * cache.q[rc.srcs]
            grads.layers[l - 1].w_v += g_v.T @ rc.rho
            g_rho = g_v @ layer.w_v
            grads.layers[l - 1].w_k += g_k.T @ rc.rho
            g_rho += g_k @ layer.w_k
            grads.layers[l - 1].w_rel += g_rho.T @ rc.u
            g_u = g_rho @ layer.w_rel
            np.add.at(g_e_layers[l - 1], rc.srcs, g_u[:, :d_n])
            grads.rel_emb[r_index] += g_u[:, d_n : d_n + d_r].sum(axis=0)
            np.add.at(g_e_layers[l - 1], rc.dsts, g_u[:, d_n + d_r :])
        if n:
            grads.layers[l - 1].w_q += g_q_total.T @ e_prev
            g_e_layers[l - 1] += g_q_total @ layer.w_q

    # Mean init of the graph node, then moral fusion.
    if n:
        g_e0 = g_e_layers[0] + g_h_layers[0][None, :] / n
        grads.w_moral += g_e0.T @ result._fused_input
        grads.b_moral += g_e0.sum(axis=0)
        g_fused = g_e0 @ params.w_moral
        moral_idx = np.array([MORAL_ORDER.index(ev.moral) for ev in graph.events], dtype=np.intp)
        np.add.at(grads.moral_emb, moral_idx, g_fused[:, d_n:])
    return grads


# ---------------------------------------------------------------------------
# Loss specs and the toy training loop.
# ---------------------------------------------------------------------------


class LossSpec:
    """A differentiable scalar function of the soft prompt."""

    def value_and_grad(self, soft_prompt: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError


@dataclass
class SquaredDistanceLoss(LossSpec):
    """Default loss: squared Euclidean distance to a fixed target vector."""

    target: np.ndarray

    def value_and_grad(self, soft_prompt: np.ndarray) -> tuple[float, np.ndarray]:
        diff = soft_prompt - self.target
        return float(diff @ diff), 2.0 * diff


def gradient(
    graph: MultiDocGraph,
    init: np.ndarray,
    params: EncoderParams,
    config: EncoderConfig,
    loss_spec: LossSpec,
) -> tuple[float, EncoderParams]:
    """Loss value and exact gradients for one graph."""
    result = forward(graph, init, params, config)
    loss, g_prompt = loss_spec.value_and_grad(result.soft_prompt)
    return loss, backward(graph, result, params, config, g_prompt)


@dataclass
class TrainResult:
    params: EncoderParams
    trace: list[float]


DIVERGENCE_BOUND = 1e6


def train_toy(
    graphs: Sequence[MultiDocGraph],
    inits: Sequence[np.ndarray],
    config: EncoderConfig,
    losses: Sequence[LossSpec],
    steps: int = 200,
    lr: float = 1e-2,
    params: EncoderParams | None = None,
) -> TrainResult:
    """Plain gradient descent on the encoder parameters against frozen
    losses (typically a frozen mock-LM readout). The trace holds the batch
    loss before each step plus the final loss, so len(trace) == steps + 1.
    Bit-reproducible for a fixed config seed."""
    if not (len(graphs) == len(inits) == len(losses)):
        raise ValueError("graphs, inits, and losses must align")
    params = params.copy() if params is not None else init_params(config)
    trace: list[float] = []

    def batch_grad() -> tuple[float, EncoderParams]:
        total = 0.0
        acc = params.zeros_like()
        for graph, init, loss_spec in zip(graphs, inits, losses):
            try:
                loss, grads = gradient(graph, init, params, config, loss_spec)
            except NumericError as exc:
                raise TrainingDivergedError(f"parameters exploded: {exc}") from exc
            total += loss
            acc.add_scaled(grads, 1.0)
        acc.scale(1.0 / len(graphs))
        return total / len(graphs), acc

    for _ in range(steps):
        loss, grads = batch_grad()
        if not np.isfinite(loss) or loss > DIVERGENCE_BOUND:
            raise TrainingDivergedError(f"loss {loss} exceeded {DIVERGENCE_BOUND}")
        trace.append(loss)
        params.add_scaled(grads, -lr)
    final_loss, _ = batch_grad()
    if not np.isfinite(final_loss) or final_loss > DIVERGENCE_BOUND:
        raise TrainingDivergedError(f"loss {final_loss} exceeded {DIVERGENCE_BOUND}")
    trace.append(final_loss)
    return TrainResult(params=params, trace=trace)


# ---------------------------------------------------------------------------
# Checkpoints and loss traces.
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, params: EncoderParams, config: EncoderConfig) -> None:
    arrays = {name.replace(".", "__"): arr for name, arr in params.blocks()}
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": {
            "d_node": config.d_node,
            "d_rel": config.d_rel,
            "d_k": config.d_k,
            "n_layers": config.n_layers,
            "d_llm": config.d_llm,
            "seed": config.seed,
            "scale_attention": config.scale_attention,
        },
    }
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path: str | Path) -> tuple[EncoderParams, EncoderConfig]:
    data = np.load(path)
    meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
    if meta["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta['version']}")
    config = EncoderConfig(**meta["config"])
    params = init_params(config)
    for name, arr in params.blocks():
        arr[...] = data[name.replace(".", "__")]
    return params, config


def save_loss_trace(path: str | Path, trace: Sequence[float]) -> None:
    lines = ["step,loss"] + [f"{i},{value:.17g}" for i, value in enumerate(trace)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
