"""FastAPI application.

Stub mode answers every endpoint from the deterministic rules in stubs.py.
Real mode is an adapter seam: it validates model paths at startup and
answers 503 until an adapter is registered, since bundling trained models is
out of scope here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import stubs
from .schemas import (
    CrossdocOut,
    CrossdocRequest,
    DocumentIn,
    EventsOut,
    HealthOut,
    IdeologyOut,
    IdeologyRequest,
    MoralsOut,
    MoralRequest,
    RelationsOut,
    RelationsRequest,
)

REQUIRED_MODELS = (
    "event_identifier",
    "moral_classifier",
    "relation_extractor",
    "coref_resolver",
    "ideology_classifier",
)


class ModelAdapter(Protocol):
    """Interface a real-model backend must implement; mirrors the stub
    functions one for one."""

    def predict_events(self, doc: dict) -> list[dict]: ...

    def predict_morals(self, events: list[dict]) -> list[dict]: ...

    def predict_relations(self, events: list[dict], pairs: list[tuple[str, str]] | None) -> list[dict]: ...

    def predict_crossdoc(self, events: list[dict]) -> list[list[str]]: ...

    def classify_ideology(self, text: str) -> dict: ...


@dataclass
class ServiceConfig:
    mode: str = "stub"  # "stub" | "real"
    model_paths: dict[str, str] = field(default_factory=dict)
    port: int = 8081
    seed: int = 0  # reserved: stub rules are constant, so any seed is reproducible

    def __post_init__(self):
        if self.mode not in ("stub", "real"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "real":
            missing = [name for name in REQUIRED_MODELS if name not in self.model_paths]
            if missing:
                raise ValueError(f"real mode requires model paths for: {missing}")


def create_app(config: ServiceConfig | None = None, adapter: ModelAdapter | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="graphsum model service", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def schema_error(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def backend_unavailable() -> JSONResponse | None:
        if config.mode == "real" and adapter is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        return None

    @app.get("/healthz", response_model=HealthOut)
    def healthz():
        return HealthOut(status="ok", mode=config.mode)

    @app.post("/extract/events", response_model=EventsOut)
    def extract_events(doc: DocumentIn):
        unavailable = backend_unavailable()
        if unavailable:
            return unavailable
        backend = adapter.predict_events if adapter else stubs.predict_events
        return EventsOut(doc_id=doc.doc_id, events=backend(doc.model_dump()))

    @app.post("/classify/moral", response_model=MoralsOut)
    def classify_moral(request: MoralRequest):
        unavailable = backend_unavailable()
        if unavailable:
            return unavailable
        events = [e.model_dump() for e in request.events]
        backend = adapter.predict_morals if adapter else stubs.predict_morals
        return MoralsOut(doc_id=request.doc_id, morals=backend(events))

    @app.post("/extract/relations", response_model=RelationsOut)
    def extract_relations(request: RelationsRequest):
        unavailable = backend_unavailable()
        if unavailable:
            return unavailable
        events = [e.model_dump() for e in request.events]
        known = {e["event_id"] for e in events}
        if request.pairs is not None:
            unknown = [
                pid
                for pair in request.pairs
                for pid in (pair.source_event_id, pair.target_event_id)
                if pid not in known
            ]
            if unknown:
                return JSONResponse(
                    status_code=404, content={"detail": f"unknown event ids: {sorted(set(unknown))}"}
                )
        if adapter:
            requested = (
                [(p.source_event_id, p.target_event_id) for p in request.pairs]
                if request.pairs is not None
                else None
            )
            pairs = adapter.predict_relations(events, requested)
        else:
            pairs = stubs.predict_relations(events)
            if request.pairs is not None:
                wanted = {(p.source_event_id, p.target_event_id) for p in request.pairs}
                pairs = [p for p in pairs if (p["source_event_id"], p["target_event_id"]) in wanted]
        return RelationsOut(doc_id=request.doc_id, pairs=pairs)

    @app.post("/coref/crossdoc", response_model=CrossdocOut)
    def coref_crossdoc(request: CrossdocRequest):
        unavailable = backend_unavailable()
        if unavailable:
            return unavailable
        events = [e.model_dump() for e in request.events]
        backend = adapter.predict_crossdoc if adapter else stubs.predict_crossdoc
        return CrossdocOut(cluster_id=request.cluster_id, clusters=backend(events))

    @app.post("/classify/ideology", response_model=IdeologyOut)
    def classify_ideology(request: IdeologyRequest):
        unavailable = backend_unavailable()
        if unavailable:
            return unavailable
        backend = adapter.classify_ideology if adapter else stubs.classify_ideology
        return IdeologyOut(**backend(request.text))

    return app


app = create_app()
