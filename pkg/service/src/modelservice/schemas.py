"""Request/response bodies. Response shapes mirror the pipeline's prediction
file schemas field for field; breaking them breaks the shared fixtures."""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator, model_validator


class DocumentIn(BaseModel):
    doc_id: str
    ideology_tag: str = "unknown"
    text: str
    token_spans: list[tuple[int, int]]

    @model_validator(mode="after")
    def spans_inside_text(self):
        previous_end = None
        for start, end in self.token_spans:
            if not (0 <= start < end <= len(self.text)):
                raise ValueError(f"token span ({start}, {end}) outside text bounds")
            if previous_end is not None and start < previous_end:
                raise ValueError("token spans must be strictly increasing")
            previous_end = end
        return self


class EventPredictionOut(BaseModel):
    doc_id: str
    token_index: int
    p_event: float
    p_non_event: float


class EventsOut(BaseModel):
    doc_id: str
    events: list[EventPredictionOut]


class EventRef(BaseModel):
    event_id: str
    trigger_text: str
    char_start: int = 0
    doc_id: str | None = None


class MoralRequest(BaseModel):
    doc_id: str
    events: list[EventRef]

    @field_validator("events")
    @classmethod
    def unique_ids(cls, events):
        ids = [e.event_id for e in events]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate event_id in request")
        return events


class MoralPredictionOut(BaseModel):
    event_id: str
    probs: list[float] = Field(min_length=11, max_length=11)


class MoralsOut(BaseModel):
    doc_id: str
    morals: list[MoralPredictionOut]


class PairRef(BaseModel):
    source_event_id: str
    target_event_id: str


class RelationsRequest(BaseModel):
    doc_id: str
    events: list[EventRef]
    pairs: list[PairRef] | None = None  # default: all pairs in textual order

    @field_validator("events")
    @classmethod
    def unique_ids(cls, events):
        ids = [e.event_id for e in events]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate event_id in request")
        return events


class PairPredictionOut(BaseModel):
    source_event_id: str
    target_event_id: str
    coref_probs: list[float] = Field(min_length=2, max_length=2)
    temporal_probs: list[float] = Field(min_length=4, max_length=4)
    causal_probs: list[float] = Field(min_length=3, max_length=3)
    subevent_probs: list[float] = Field(min_length=3, max_length=3)


class RelationsOut(BaseModel):
    doc_id: str
    pairs: list[PairPredictionOut]


class CrossdocRequest(BaseModel):
    cluster_id: str
    events: list[EventRef]

    @model_validator(mode="after")
    def members_carry_doc_ids(self):
        for event in self.events:
            if event.doc_id is None:
                raise ValueError("cross-doc events must carry doc_id")
        ids = [e.event_id for e in self.events]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate event_id in request")
        return self


class CrossdocOut(BaseModel):
    cluster_id: str
    clusters: list[list[str]]


class IdeologyRequest(BaseModel):
    text: str


class IdeologyOut(BaseModel):
    p_liberal: float
    p_center: float
    p_conservative: float


class HealthOut(BaseModel):
    status: str
    mode: str
