"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with -s to see them). Tolerances are pinned here and
nowhere else."""

import json
import time
from contextlib import contextmanager
from math import exp
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from graphsum import graph as graphlib
from graphsum.cli import main as cli_main
from graphsum.gat import (
    EncoderConfig,
    SquaredDistanceLoss,
    forward,
    gradient,
    hash_node_init,
    init_params,
    train_toy,
)
from graphsum.graph import MultiDocGraph, compute_stats, merge_coreference, validate
from graphsum.ingest import crossdoc_from_dict, decode_graph, doc_predictions_from_dict
from graphsum.metrics import IdeologyProbs, bleu2, polarization, rouge_l, rouge_lsum, rouge_n
from graphsum.mocklm import MockLM, ReadoutLoss
from graphsum.textualize import load_template, parse_tables, render_hard_prompt, tabulate

import oracles
from conftest import FIXTURES
from genutil import five_node_fixture, random_encoder_graph, random_graph
from test_graph import brute_force_stats


@contextmanager
def criterion(name: str):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS ({time.perf_counter() - started:.1f}s)")


def finite_difference_all_blocks(graph, init, params, config, loss_spec, h=1e-5):
    fd = params.zeros_like()
    for (_, arr), (_, out) in zip(params.blocks(), fd.blocks()):
        flat, target = arr.reshape(-1), out.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = loss_spec.value_and_grad(forward(graph, init, params, config).soft_prompt)
            flat[i] = orig - h
            down, _ = loss_spec.value_and_grad(forward(graph, init, params, config).soft_prompt)
            flat[i] = orig
            target[i] = (up - down) / (2.0 * h)
    return fd


def test_gradient_correctness():
    """Analytic gradients match central finite differences (rel err <= 1e-4)
    for every parameter block on >= 20 random graphs, within 60 s."""
    with criterion("gradient-correctness"):
        rng = np.random.default_rng(314)
        started = time.perf_counter()
        for case in range(20):
            n_nodes = int(rng.integers(3, 9))
            d = int(rng.integers(4, 9))
            config = EncoderConfig(
                d_node=d,
                d_rel=d,
                d_k=d,
                n_layers=int(rng.integers(1, 3)),
                d_llm=int(rng.integers(4, 9)),
                seed=1000 + case,
                scale_attention=bool(case % 2),
            )
            params = init_params(config)
            graph = random_encoder_graph(rng, n_nodes)
            init = hash_node_init(graph, d)
            loss_spec = SquaredDistanceLoss(rng.normal(size=config.d_llm))
            _, analytic = gradient(graph, init, params, config, loss_spec)
            numeric = finite_difference_all_blocks(graph, init, params, config, loss_spec)
            for (name, a), (_, b) in zip(analytic.blocks(), numeric.blocks()):
                norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
                if max(norm_a, norm_b) < 1e-7:
                    continue
                rel = np.linalg.norm(a - b) / max(norm_a, norm_b)
                assert rel <= 1e-4, f"case {case} block {name}: rel error {rel:.2e}"
        assert time.perf_counter() - started < 60.0


def test_attention_normalization():
    """Every softmax weight group sums to 1 +- 1e-9 over >= 1000 graphs."""
    with criterion("attention-normalization"):
        rng = np.random.default_rng(271)
        config = EncoderConfig(d_node=5, d_rel=4, d_k=4, n_layers=2, d_llm=4, seed=3)
        params = init_params(config)
        checked = 0
        for _ in range(1000):
            graph = random_encoder_graph(rng, int(rng.integers(2, 8)))
            result = forward(graph, hash_node_init(graph, 5), params, config)
            for group in result.attention_groups:
                assert abs(float(group.sum()) - 1.0) <= 1e-9
                checked += 1
        assert checked > 1000


def test_permutation_equivariance():
    """h_g invariant (<= 1e-9) under node relabeling on 100 random graphs."""
    with criterion("permutation-equivariance"):
        rng = np.random.default_rng(161)
        config = EncoderConfig(d_node=5, d_rel=4, d_k=4, n_layers=2, d_llm=5, seed=5)
        params = init_params(config)
        for _ in range(100):
            graph = random_encoder_graph(rng, int(rng.integers(3, 8)))
            init = hash_node_init(graph, 5)
            base = forward(graph, init, params, config)
            perm = rng.permutation(len(graph.events))
            permuted = MultiDocGraph(
                graph.cluster_id,
                graph.documents,
                tuple(graph.events[i] for i in perm),
                graph.relations,
                graph.coref_partition,
            )
            shuffled = forward(permuted, init[perm], params, config)
            assert np.max(np.abs(shuffled.graph_embedding - base.graph_embedding)) <= 1e-9


def test_metric_oracle_equivalence():
    """Rouge-1/2/L/Lsum and BLEU-2 equal the naive oracle on 1000 random
    token sequences; identity scores 1.0; hand fixtures to 1e-12."""
    with criterion("metric-oracle-equivalence"):
        rng = np.random.default_rng(97)
        vocab = ["a", "b", "c", "d", "e", "f", "g"]
        for _ in range(1000):
            hyp_tokens = [vocab[int(rng.integers(0, len(vocab)))] for _ in range(int(rng.integers(0, 31)))]
            ref_tokens = [vocab[int(rng.integers(0, len(vocab)))] for _ in range(int(rng.integers(0, 31)))]
            hyp, ref = " ".join(hyp_tokens), " ".join(ref_tokens)
            assert rouge_n(hyp, ref, 1) == oracles.rouge_n_naive(hyp_tokens, ref_tokens, 1)
            assert rouge_n(hyp, ref, 2) == oracles.rouge_n_naive(hyp_tokens, ref_tokens, 2)
            assert rouge_l(hyp, ref) == oracles.rouge_l_naive(hyp_tokens, ref_tokens)
            assert rouge_lsum(hyp, ref) == oracles.rouge_lsum_naive([hyp_tokens], [ref_tokens])
            assert bleu2(hyp, ref) == oracles.bleu2_naive(hyp_tokens, ref_tokens)
            if len(hyp_tokens) >= 2:
                assert rouge_n(hyp, hyp, 1) == 1.0
                assert rouge_n(hyp, hyp, 2) == 1.0
                assert rouge_l(hyp, hyp) == 1.0
                assert rouge_lsum(hyp, hyp) == 1.0
                assert bleu2(hyp, hyp) == 1.0
        assert abs(rouge_n("the cat", "the cat sat", 1) - 0.8) <= 1e-12
        assert abs(rouge_l("a c d", "a b c d") - 6.0 / 7.0) <= 1e-12


def test_polarization_criterion():
    """polarization == 1 - p_center on fuzzed distributions; boundary cases
    exact."""
    with criterion("polarization"):
        rng = np.random.default_rng(53)
        for _ in range(1000):
            raw = rng.random(3)
            probs = raw / raw.sum()
            # Renormalize center exactly so the distribution sums to 1.
            ideology = IdeologyProbs(float(probs[0]), float(1.0 - probs[0] - probs[2]), float(probs[2]))
            assert polarization(ideology) == min(1.0, max(0.0, 1.0 - ideology.p_center))
        assert polarization(IdeologyProbs(0.0, 1.0, 0.0)) == 0.0
        assert polarization(IdeologyProbs(0.5, 0.0, 0.5)) == 1.0


def test_textualization_round_trip():
    """parse(render(tabulate(g))) == tabulate(g) on 500 random graphs; the
    baseline prompt for a fixture cluster byte-equals the template."""
    with criterion("textualization-round-trip"):
        rng = np.random.default_rng(23)
        template = load_template("graph")
        for _ in range(500):
            graph = random_graph(rng)
            tables = tabulate(graph)
            articles = [d.text for d in graph.documents]
            prompt = render_hard_prompt(tables, articles, template)
            assert parse_tables(prompt) == tables

        cluster = json.loads((FIXTURES / "clusters" / "c01.json").read_text())
        articles = [d["text"] for d in cluster["documents"]]
        rendered = render_hard_prompt(None, articles, load_template("baseline"))
        expected = (
            "Please summarize the given text. Text: "
            + articles[0]
            + " /s "
            + articles[1]
            + " /s "
            + articles[2]
            + ". Summary:"
        )
        assert rendered == expected


def test_graph_construction():
    """merge_coreference idempotence and disjointness on 1000 graphs; stats
    equal brute-force recounts; decoding is byte-deterministic."""
    with criterion("graph-construction"):
        rng = np.random.default_rng(87)
        for _ in range(1000):
            graph = random_graph(rng)
            assert validate(graph).ok
            again = merge_coreference(graph)
            assert again.coref_partition == graph.coref_partition
            seen = set()
            for members in graph.coref_partition:
                assert len(members) >= 2 and not (members & seen)
                seen |= members
            assert compute_stats(graph) == brute_force_stats(graph)

        from graphsum.pipeline import load_cluster

        for cid in ("c01", "c02"):
            cluster = load_cluster(FIXTURES / "clusters" / f"{cid}.json")
            predictions = {
                doc.doc_id: doc_predictions_from_dict(
                    json.loads((FIXTURES / "predictions" / cid / f"{doc.doc_id}.json").read_text())
                )
                for doc in cluster.documents
            }
            crossdoc = crossdoc_from_dict(
                json.loads((FIXTURES / "predictions" / cid / "crossdoc.json").read_text())
            )
            runs = {
                graphlib.dumps(decode_graph(cid, cluster.documents, predictions, crossdoc))
                for _ in range(3)
            }
            assert len(runs) == 1


def test_toy_soft_prompt_training():
    """200 descent steps on the 5-node fixture cut the loss below 10% of its
    initial value, bit-reproducibly per seed."""
    with criterion("toy-soft-prompt-training"):
        graph = five_node_fixture()
        config = EncoderConfig(d_node=6, d_rel=4, d_k=4, n_layers=2, d_llm=8, seed=7)
        lm = MockLM(8, seed=0)
        text_emb = lm.embed_text("storm hit coast officials warned residents")
        ref_prompt = lm.embed_text("a storm hit the coast and officials warned residents").mean(axis=0)
        target, _ = lm.readout(ref_prompt, text_emb)
        loss = ReadoutLoss(lm=lm, text_emb=text_emb, target=target)
        init = hash_node_init(graph, config.d_node)
        first = train_toy([graph], [init], config, [loss], steps=200, lr=1e-2)
        assert first.trace[-1] < 0.1 * first.trace[0]
        second = train_toy([graph], [init], config, [loss], steps=200, lr=1e-2)
        assert first.trace == second.trace
        for (_, a), (_, b) in zip(first.params.blocks(), second.params.blocks()):
            assert np.array_equal(a, b)


def test_end_to_end_fixture_run(tmp_path):
    """pipeline run over the 2-cluster fixture with the mock LLM completes,
    every stage artifact is schema-valid on reload, and the report has the
    content-then-bias column shape. No model service involved."""
    with criterion("end-to-end"):
        config_payload = {
            "clusters_dir": str(FIXTURES / "clusters"),
            "predictions_dir": str(FIXTURES / "predictions"),
            "lexicon_path": str(FIXTURES / "vad_lexicon.tsv"),
            "mock_responses": str(FIXTURES / "mock_llm.json"),
            "output_dir": str(tmp_path / "out"),
            "cache_dir": str(tmp_path / "cache"),
            "prompt_kind": "graph",
            "strict_neus": True,
            "encoder": {"d_node": 6, "d_rel": 4, "d_k": 4, "n_layers": 2, "d_llm": 8, "seed": 7, "steps": 40},
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config_payload))
        result = CliRunner().invoke(cli_main, ["run", "--config", str(config_path)])
        assert result.exit_code == 0, result.output

        out = tmp_path / "out"
        for cid in ("c01", "c02"):
            ingested = json.loads((out / "ingested" / f"{cid}.json").read_text())
            for doc_payload in ingested["predictions"].values():
                doc_predictions_from_dict(doc_payload)  # schema-valid
            crossdoc_from_dict(ingested["crossdoc"])
            graph = graphlib.loads((out / "graphs" / f"{cid}.json").read_text())
            assert validate(graph, strict_neus=True).ok
            tables = parse_tables((out / "prompts" / f"{cid}.txt").read_text())
            assert tables == tabulate(graph)
            trace_lines = (out / "encoder" / f"{cid}.trace.csv").read_text().splitlines()
            assert trace_lines[0] == "step,loss" and len(trace_lines) == 42
            summary = json.loads((out / "summaries" / f"{cid}.json").read_text())
            assert summary["summary_text"]

        report = json.loads((out / "report" / "report.json").read_text())
        assert len(report["records"]) == 2
        header = (out / "report" / "report.md").read_text().splitlines()[0]
        assert header.startswith("| cluster | Rouge-1 | Rouge-2 | Rouge-L | Rouge-Lsum | BLEU-2 |")
        assert header.endswith("| polarization | p-arousal | n-arousal | sum-arousal |")
