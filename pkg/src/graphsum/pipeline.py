"""Pipeline orchestration: ingest -> build -> textualize -> encode ->
summarize -> evaluate -> report, with one artifact directory per stage.

Every stage reads the previous stage's serialized artifact and is skipped on
re-runs while its outputs exist (unless forced), so interrupted runs resume
where they stopped. Clusters are processed in a bounded worker pool; work
within a cluster stays sequential.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import requests

from . import client as llm
from . import gat, graph as graphlib, ingest, metrics, textualize
from .graph import Document, Ideology, MultiDocGraph
from .ideology import keyword_ideology_probs
from .mocklm import MockLM, ReadoutLoss

STAGES = ("ingest", "build", "textualize", "encode", "summarize", "evaluate", "report")


class PipelineError(RuntimeError):
    pass


class ConfigError(PipelineError):
    """Bad or unresolvable configuration. CLI exit code 2."""


class DependencyError(PipelineError):
    """A stage's upstream artifact is missing. CLI exit code 3."""


class RemoteServiceError(PipelineError):
    """The model service or LLM endpoint failed. CLI exit code 4."""


# Full-scale fine-tuning settings kept as reference defaults; the desk-scale
# pipeline never exercises them.
FULL_SCALE_DEFAULTS = {
    "max_input_tokens": 2048,
    "max_output_tokens": 512,
    "epochs": 5,
    "gradient_accumulation_steps": 16,
    "weight_decay": 1e-2,
    "lr_decoder_only": 1e-4,
    "lr_encoder_decoder": 1e-5,
    "lora_rank": 8,
    "lora_alpha": 16,
    "lora_dropout": 0.05,
}


@dataclass
class EncoderRunConfig:
    d_node: int = 8
    d_rel: int = 8
    d_k: int = 8
    n_layers: int = 2
    d_llm: int = 16
    seed: int = 7
    scale_attention: bool = False
    steps: int = 100
    lr: float = 1e-2

    def encoder_config(self) -> gat.EncoderConfig:
        return gat.EncoderConfig(
            d_node=self.d_node,
            d_rel=self.d_rel,
            d_k=self.d_k,
            n_layers=self.n_layers,
            d_llm=self.d_llm,
            seed=self.seed,
            scale_attention=self.scale_attention,
        )


@dataclass
class PipelineConfig:
    clusters_dir: Path
    predictions_dir: Path
    lexicon_path: Path
    output_dir: Path
    cache_dir: Path
    templates_dir: Path | None = None
    prompt_kind: str = "graph"
    model_id: str = "mock-1"
    llm_endpoint: str | None = None
    llm_api_key: str | None = None
    mock_responses: Path | None = None
    model_service_url: str | None = None
    max_input_tokens: int = 2048
    max_output_tokens: int = 512
    temperature: float = 0.0
    v_pos: float = metrics.V_POS_DEFAULT
    v_neg: float = metrics.V_NEG_DEFAULT
    strict_neus: bool = False
    parallelism: int = 4
    encoder: EncoderRunConfig = field(default_factory=EncoderRunConfig)

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        base = path.parent

        def resolve(key: str, required: bool = True) -> Path | None:
            value = payload.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"config key {key!r} is required")
                return None
            return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

        encoder = EncoderRunConfig(**payload.get("encoder", {}))
        config = PipelineConfig(
            clusters_dir=resolve("clusters_dir"),
            predictions_dir=resolve("predictions_dir"),
            lexicon_path=resolve("lexicon_path"),
            output_dir=resolve("output_dir"),
            cache_dir=resolve("cache_dir"),
            templates_dir=resolve("templates_dir", required=False),
            prompt_kind=payload.get("prompt_kind", "graph"),
            model_id=payload.get("model_id", "mock-1"),
            llm_endpoint=payload.get("llm_endpoint"),
            llm_api_key=payload.get("llm_api_key"),
            mock_responses=resolve("mock_responses", required=False),
            model_service_url=payload.get("model_service_url"),
            max_input_tokens=payload.get("max_input_tokens", 2048),
            max_output_tokens=payload.get("max_output_tokens", 512),
            temperature=payload.get("temperature", 0.0),
            v_pos=payload.get("v_pos", metrics.V_POS_DEFAULT),
            v_neg=payload.get("v_neg", metrics.V_NEG_DEFAULT),
            strict_neus=payload.get("strict_neus", False),
            parallelism=payload.get("parallelism", 4),
            encoder=encoder,
        )
        config.check()
        return config

    def check(self) -> None:
        if self.prompt_kind not in {k.value for k in llm.PromptKind}:
            raise ConfigError(f"unknown prompt_kind {self.prompt_kind!r}")
        for name in ("clusters_dir", "lexicon_path"):
            target = getattr(self, name)
            if not Path(target).exists():
                raise ConfigError(f"{name} does not exist: {target}")
        if self.model_service_url is None and not Path(self.predictions_dir).exists():
            raise ConfigError(f"predictions_dir does not exist: {self.predictions_dir}")
        if self.mock_responses is not None and not Path(self.mock_responses).exists():
            raise ConfigError(f"mock_responses does not exist: {self.mock_responses}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


# ---------------------------------------------------------------------------
# Cluster input files.
# ---------------------------------------------------------------------------

_TOKEN_RUN = re.compile(r"\S+")


def word_spans(text: str) -> tuple[tuple[int, int], ...]:
    """Whitespace-run token offsets; the tokenization contract shared with
    the model service."""
    return tuple((m.start(), m.end()) for m in _TOKEN_RUN.finditer(text))


@dataclass(frozen=True)
class Cluster:
    cluster_id: str
    documents: tuple[Document, ...]
    reference_summary: str


def load_cluster(path: str | Path) -> Cluster:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    documents = tuple(
        Document(
            doc_id=d["doc_id"],
            ideology_tag=Ideology(d.get("ideology_tag", "unknown")),
            text=d["text"],
            token_spans=tuple(tuple(s) for s in d["token_spans"])
            if "token_spans" in d
            else word_spans(d["text"]),
        )
        for d in payload["documents"]
    )
    return Cluster(
        cluster_id=payload["cluster_id"],
        documents=documents,
        reference_summary=payload.get("reference_summary", ""),
    )


def list_clusters(clusters_dir: str | Path) -> list[Path]:
    return sorted(Path(clusters_dir).glob("*.json"))


# ---------------------------------------------------------------------------
# Model-service access (used instead of prediction files when configured).
# ---------------------------------------------------------------------------


def _service_post(url: str, payload: dict) -> dict:
    try:
        response = requests.post(url, json=payload, timeout=30)
    except requests.RequestException as exc:
        raise RemoteServiceError(f"model service unreachable at {url}: {exc}") from exc
    if response.status_code != 200:
        raise RemoteServiceError(f"model service {url} returned {response.status_code}: {response.text[:200]}")
    return response.json()


def fetch_predictions(base_url: str, cluster: Cluster) -> tuple[dict[str, dict], dict]:
    """Query the model service for every document of a cluster and return
    payloads shaped exactly like the prediction files."""
    base = base_url.rstrip("/")
    doc_payloads: dict[str, dict] = {}
    cluster_events: list[dict] = []
    for doc_index, doc in enumerate(cluster.documents):
        doc_json = {
            "doc_id": doc.doc_id,
            "ideology_tag": doc.ideology_tag.value,
            "text": doc.text,
            "token_spans": [list(s) for s in doc.token_spans],
        }
        events_payload = _service_post(f"{base}/extract/events", doc_json)
        preds = [
            ingest.EventPrediction(
                doc_id=e["doc_id"],
                token_index=e["token_index"],
                p_event=e["p_event"],
                p_non_event=e["p_non_event"],
            )
            for e in events_payload["events"]
        ]
        decoded = ingest.decode_events(doc, preds, doc_index)
        event_dicts = [
            {
                "event_id": ev.event_id,
                "doc_id": ev.doc_id,
                "trigger_text": ev.trigger_text,
                "char_start": ev.char_start,
            }
            for ev in decoded
        ]
        morals_payload = _service_post(
            f"{base}/classify/moral", {"doc_id": doc.doc_id, "events": event_dicts}
        )
        relations_payload = _service_post(
            f"{base}/extract/relations", {"doc_id": doc.doc_id, "events": event_dicts}
        )
        doc_payloads[doc.doc_id] = {
            "doc_id": doc.doc_id,
            "events": events_payload["events"],
            "morals": morals_payload["morals"],
            "pairs": relations_payload["pairs"],
        }
        cluster_events.extend(event_dicts)
    crossdoc_payload = _service_post(
        f"{base}/coref/crossdoc", {"cluster_id": cluster.cluster_id, "events": cluster_events}
    )
    return doc_payloads, {"cluster_id": cluster.cluster_id, "clusters": crossdoc_payload["clusters"]}


def fetch_ideology(base_url: str, text: str) -> metrics.IdeologyProbs:
    payload = _service_post(f"{base_url.rstrip('/')}/classify/ideology", {"text": text})
    return metrics.IdeologyProbs(
        p_liberal=payload["p_liberal"],
        p_center=payload["p_center"],
        p_conservative=payload["p_conservative"],
    )


# ---------------------------------------------------------------------------
# Stage implementations. Each one consumes the previous stage's files.
# ---------------------------------------------------------------------------


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path, stage: str, detail: str) -> dict:
    if not path.is_file():
        raise DependencyError(f"stage {stage!r} needs {detail}: missing {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _read_text(path: Path, stage: str, detail: str) -> str:
    if not path.is_file():
        raise DependencyError(f"stage {stage!r} needs {detail}: missing {path}")
    return path.read_text(encoding="utf-8")


@dataclass
class StageOutcome:
    stage: str
    cluster_id: str
    status: str  # "ok" or "cached"


class Pipeline:
    def __init__(self, config: PipelineConfig, force: bool = False, log: Callable[[str], None] = print):
        self.config = config
        self.force = force
        self.log = log
        self.out = Path(config.output_dir)

    # -- paths ------------------------------------------------------------

    def ingested_path(self, cid: str) -> Path:
        return self.out / "ingested" / f"{cid}.json"

    def graph_path(self, cid: str) -> Path:
        return self.out / "graphs" / f"{cid}.json"

    def stats_path(self, cid: str) -> Path:
        return self.out / "graphs" / f"{cid}.stats.json"

    def tables_path(self, cid: str) -> Path:
        return self.out / "tables" / f"{cid}.txt"

    def prompt_path(self, cid: str) -> Path:
        return self.out / "prompts" / f"{cid}.txt"

    def request_path(self, cid: str) -> Path:
        return self.out / "prompts" / f"{cid}.request.json"

    def checkpoint_path(self, cid: str) -> Path:
        return self.out / "encoder" / f"{cid}.npz"

    def trace_path(self, cid: str) -> Path:
        return self.out / "encoder" / f"{cid}.trace.csv"

    def summary_path(self, cid: str) -> Path:
        return self.out / "summaries" / f"{cid}.json"

    def records_path(self) -> Path:
        return self.out / "report" / "records.json"

    # -- helpers ----------------------------------------------------------

    def cluster_ids(self) -> list[str]:
        paths = list_clusters(self.config.clusters_dir)
        if not paths:
            raise ConfigError(f"no cluster files in {self.config.clusters_dir}")
        return [p.stem for p in paths]

    def _cluster_file(self, cid: str) -> Path:
        return Path(self.config.clusters_dir) / f"{cid}.json"

    def _skip(self, stage: str, cid: str, *outputs: Path) -> bool:
        return not self.force and all(p.is_file() for p in outputs)

    def _map(self, fn: Callable[[str], StageOutcome], cids: Sequence[str]) -> list[StageOutcome]:
        if self.config.parallelism == 1 or len(cids) <= 1:
            return [fn(cid) for cid in cids]
        with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
            return list(pool.map(fn, cids))

    # -- stages -----------------------------------------------------------

    def stage_ingest(self, cids: Sequence[str]) -> list[StageOutcome]:
        def one(cid: str) -> StageOutcome:
            target = self.ingested_path(cid)
            if self._skip("ingest", cid, target):
                return StageOutcome("ingest", cid, "cached")
            cluster = load_cluster(self._cluster_file(cid))
            if self.config.model_service_url:
                doc_payloads, crossdoc_payload = fetch_predictions(self.config.model_service_url, cluster)
            else:
                pred_dir = Path(self.config.predictions_dir) / cid
                doc_payloads = {}
                for doc in cluster.documents:
                    path = pred_dir / f"{doc.doc_id}.json"
                    if not path.is_file():
                        raise DependencyError(f"stage 'ingest' needs prediction file {path}")
                    doc_payloads[doc.doc_id] = json.loads(path.read_text(encoding="utf-8"))
                crossdoc_file = pred_dir / "crossdoc.json"
                if not crossdoc_file.is_file():
                    raise DependencyError(f"stage 'ingest' needs cross-doc file {crossdoc_file}")
                crossdoc_payload = json.loads(crossdoc_file.read_text(encoding="utf-8"))
            # Parse once now so schema violations surface at ingest time.
            for doc_id, payload in doc_payloads.items():
                ingest.doc_predictions_from_dict(payload)
            ingest.crossdoc_from_dict(crossdoc_payload)
            _write_json(
                target,
                {
                    "cluster_id": cluster.cluster_id,
                    "reference_summary": cluster.reference_summary,
                    "documents": [
                        {
                            "doc_id": d.doc_id,
                            "ideology_tag": d.ideology_tag.value,
                            "text": d.text,
                            "token_spans": [list(s) for s in d.token_spans],
                        }
                        for d in cluster.documents
                    ],
                    "predictions": doc_payloads,
                    "crossdoc": crossdoc_payload,
                },
            )
            return StageOutcome("ingest", cid, "ok")

        return self._map(one, cids)

    def stage_build(self, cids: Sequence[str]) -> list[StageOutcome]:
        def one(cid: str) -> StageOutcome:
            if self._skip("build", cid, self.graph_path(cid), self.stats_path(cid)):
                return StageOutcome("build", cid, "cached")
            payload = _read_json(self.ingested_path(cid), "build", "the ingest artifact")
            documents = tuple(
                Document(
                    doc_id=d["doc_id"],
                    ideology_tag=Ideology(d["ideology_tag"]),
                    text=d["text"],
                    token_spans=tuple(tuple(s) for s in d["token_spans"]),
                )
                for d in payload["documents"]
            )
            predictions = {
                doc_id: ingest.doc_predictions_from_dict(p) for doc_id, p in payload["predictions"].items()
            }
            crossdoc = ingest.crossdoc_from_dict(payload["crossdoc"])
            graph = ingest.decode_graph(cid, documents, predictions, crossdoc)
            result = graphlib.validate(graph, strict_neus=self.config.strict_neus)
            if not result.ok:
                first = result.violations[0]
                raise PipelineError(f"decoded graph invalid ({first.rule}: {first.detail})")
            self.graph_path(cid).parent.mkdir(parents=True, exist_ok=True)
            self.graph_path(cid).write_text(graphlib.dumps(graph), encoding="utf-8")
            stats = graphlib.compute_stats(graph)
            _write_json(self.stats_path(cid), stats.__dict__)
            return StageOutcome("build", cid, "ok")

        return self._map(one, cids)

    def stage_textualize(self, cids: Sequence[str]) -> list[StageOutcome]:
        kind = llm.PromptKind(self.config.prompt_kind)
        template = textualize.load_template(kind.value, self.config.templates_dir)

        def one(cid: str) -> StageOutcome:
            outputs = (self.tables_path(cid), self.prompt_path(cid), self.request_path(cid))
            if self._skip("textualize", cid, *outputs):
                return StageOutcome("textualize", cid, "cached")
            graph = graphlib.loads(_read_text(self.graph_path(cid), "textualize", "the graph artifact"))
            ingested = _read_json(self.ingested_path(cid), "textualize", "the ingest artifact")
            tables = textualize.tabulate(graph)
            tables_text = (
                textualize.serialize_event_table(tables)
                + "\n\n"
                + textualize.serialize_relation_table(tables)
                + "\n"
            )
            self.tables_path(cid).parent.mkdir(parents=True, exist_ok=True)
            self.tables_path(cid).write_text(tables_text, encoding="utf-8")

            articles = [d["text"] for d in ingested["documents"]]
            example = None
            if kind in llm.EXAMPLE_KINDS:
                example = textualize.OneShotExample(
                    articles=tuple(articles),
                    summary=ingested.get("reference_summary", ""),
                    explanation="The articles report one shared story from different outlets.",
                )
            request, meta = llm.build_request(
                articles,
                template,
                kind,
                tables=tables if kind in llm.GRAPH_KINDS else None,
                example=example,
                model_id=self.config.model_id,
                max_input_tokens=self.config.max_input_tokens,
                max_output_tokens=self.config.max_output_tokens,
                temperature=self.config.temperature,
            )
            self.prompt_path(cid).parent.mkdir(parents=True, exist_ok=True)
            self.prompt_path(cid).write_text(request.prompt, encoding="utf-8")
            _write_json(
                self.request_path(cid),
                {
                    "cluster_id": cid,
                    "prompt_kind": kind.value,
                    "model_id": request.model_id,
                    "max_input_tokens": request.max_input_tokens,
                    "max_output_tokens": request.max_output_tokens,
                    "temperature": request.temperature,
                    "metadata": meta,
                },
            )
            return StageOutcome("textualize", cid, "ok")

        return self._map(one, cids)

    def stage_encode(self, cids: Sequence[str]) -> list[StageOutcome]:
        run_cfg = self.config.encoder
        config = run_cfg.encoder_config()
        lm = MockLM(config.d_llm, seed=config.seed)

        def one(cid: str) -> StageOutcome:
            outputs = (self.checkpoint_path(cid), self.trace_path(cid))
            if self._skip("encode", cid, *outputs):
                return StageOutcome("encode", cid, "cached")
            graph = graphlib.loads(_read_text(self.graph_path(cid), "encode", "the graph artifact"))
            ingested = _read_json(self.ingested_path(cid), "encode", "the ingest artifact")
            tables = textualize.tabulate(graph)
            tables_text = textualize.serialize_event_table(tables) + "\n" + textualize.serialize_relation_table(tables)
            reference = ingested.get("reference_summary", "")
            text_emb = lm.embed_text(tables_text)
            ref_emb = lm.embed_text(reference)
            ref_prompt = ref_emb.mean(axis=0) if ref_emb.size else np.zeros(config.d_llm)
            # Realizable target: the frozen readout of a reference-derived prompt.
            target, _ = lm.readout(ref_prompt, text_emb)
            loss = ReadoutLoss(lm=lm, text_emb=text_emb, target=target)
            init = gat.hash_node_init(graph, config.d_node)
            result = gat.train_toy(
                [graph], [init], config, [loss], steps=run_cfg.steps, lr=run_cfg.lr
            )
            self.checkpoint_path(cid).parent.mkdir(parents=True, exist_ok=True)
            gat.save_checkpoint(self.checkpoint_path(cid), result.params, config)
            gat.save_loss_trace(self.trace_path(cid), result.trace)
            return StageOutcome("encode", cid, "ok")

        return self._map(one, cids)

    def _transport(self) -> llm.Transport:
        if self.config.llm_endpoint:
            return llm.HttpTransport(self.config.llm_endpoint, api_key=self.config.llm_api_key)
        rules = llm.load_mock_rules(self.config.mock_responses) if self.config.mock_responses else []
        return llm.MockTransport(rules=rules)

    def stage_summarize(self, cids: Sequence[str]) -> list[StageOutcome]:
        transport = self._transport()
        summarizer = llm.SummarizerClient(transport, cache_dir=self.config.cache_dir)
        kind = llm.PromptKind(self.config.prompt_kind)

        def one(cid: str) -> StageOutcome:
            if self._skip("summarize", cid, self.summary_path(cid)):
                return StageOutcome("summarize", cid, "cached")
            prompt_file = self.prompt_path(cid)
            if not prompt_file.is_file():
                raise DependencyError(f"stage 'summarize' needs the prompt artifact: missing {prompt_file}")
            request_meta = _read_json(self.request_path(cid), "summarize", "the request artifact")
            request = llm.LlmRequest(
                model_id=request_meta["model_id"],
                prompt=prompt_file.read_text(encoding="utf-8"),
                max_input_tokens=request_meta["max_input_tokens"],
                max_output_tokens=request_meta["max_output_tokens"],
                temperature=request_meta["temperature"],
            )
            try:
                record = summarizer.summarize(request, cid, kind)
            except llm.ClientError as exc:
                raise RemoteServiceError(f"summarization failed for {cid}: {exc}") from exc
            _write_json(
                self.summary_path(cid),
                {
                    "cluster_id": record.cluster_id,
                    "prompt_kind": record.prompt_kind,
                    "summary_text": record.summary_text,
                    "latency_ms": record.latency_ms,
                    "provider_metadata": {**request_meta.get("metadata", {}), **record.provider_metadata},
                },
            )
            return StageOutcome("summarize", cid, "ok")

        return self._map(one, cids)

    def stage_evaluate(self, cids: Sequence[str]) -> list[StageOutcome]:
        lexicon = metrics.load_vad_lexicon(self.config.lexicon_path)
        records = []
        status: dict[str, str] = {}
        target = self.records_path()
        if self._skip("evaluate", "*", target):
            return [StageOutcome("evaluate", cid, "cached") for cid in cids]
        for cid in cids:
            summary_payload = _read_json(self.summary_path(cid), "evaluate", "the summary artifact")
            ingested = _read_json(self.ingested_path(cid), "evaluate", "the ingest artifact")
            summary = summary_payload["summary_text"]
            if self.config.model_service_url:
                ideology = fetch_ideology(self.config.model_service_url, summary)
            else:
                ideology = keyword_ideology_probs(summary)
            record = metrics.score_summary(
                cid,
                summary,
                ingested.get("reference_summary", ""),
                lexicon,
                ideology,
                v_pos=self.config.v_pos,
                v_neg=self.config.v_neg,
            )
            records.append(record)
            status[cid] = "ok"
        _write_json(target, {"records": [r.as_dict() for r in records]})
        return [StageOutcome("evaluate", cid, status.get(cid, "ok")) for cid in cids]

    def stage_report(self, cids: Sequence[str]) -> list[StageOutcome]:
        report_dir = self.out / "report"
        if self._skip("report", "*", report_dir / "report.json", report_dir / "report.md"):
            return [StageOutcome("report", "*", "cached")]
        payload = _read_json(self.records_path(), "report", "evaluation records")
        raw = payload.get("records", [])
        if not raw:
            raise DependencyError("stage 'report' refused: no scored summaries to report")
        records = [
            metrics.SummaryScores(
                cluster_id=r["cluster_id"],
                rouge1=r["rouge1"],
                rouge2=r["rouge2"],
                rougeL=r["rougeL"],
                rougeLsum=r["rougeLsum"],
                bleu2=r["bleu2"],
                polarization=r["polarization"],
                p_arousal=r["p_arousal"],
                n_arousal=r["n_arousal"],
            )
            for r in raw
        ]
        report = metrics.build_report(records)
        report_dir.mkdir(parents=True, exist_ok=True)
        (report_dir / "report.json").write_text(metrics.report_dumps(report), encoding="utf-8")
        (report_dir / "report.md").write_text(metrics.report_to_markdown(report), encoding="utf-8")

        stats_rows = {}
        for cid in cids:
            stats_file = self.stats_path(cid)
            if stats_file.is_file():
                stats_rows[cid] = json.loads(stats_file.read_text(encoding="utf-8"))
        if stats_rows:
            keys = next(iter(stats_rows.values())).keys()
            means = {k: sum(row[k] for row in stats_rows.values()) / len(stats_rows) for k in keys}
            _write_json(report_dir / "graph_stats.json", {"per_cluster": stats_rows, "means": means})
        return [StageOutcome("report", "*", "ok")]

    # -- entry point --------------------------------------------------------

    def run(self, stages: Sequence[str] | None = None) -> list[StageOutcome]:
        selected = list(stages) if stages else list(STAGES)
        unknown = [s for s in selected if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stages: {unknown}; valid: {STAGES}")
        selected.sort(key=STAGES.index)
        cids = self.cluster_ids()
        outcomes: list[StageOutcome] = []
        runners = {
            "ingest": self.stage_ingest,
            "build": self.stage_build,
            "textualize": self.stage_textualize,
            "encode": self.stage_encode,
            "summarize": self.stage_summarize,
            "evaluate": self.stage_evaluate,
            "report": self.stage_report,
        }
        for stage in selected:
            stage_outcomes = runners[stage](cids)
            for outcome in stage_outcomes:
                self.log(f"[{outcome.stage}] {outcome.cluster_id}: {outcome.status}")
            outcomes.extend(stage_outcomes)
        return outcomes
