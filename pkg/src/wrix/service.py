"""HTTP service exposing a loaded archive index for retrieval.

The service wraps the core library read-only: an index is loaded once
(at startup or via POST /index/load) and every request computes against
that in-memory snapshot. Pipeline steps that write files (ingest,
distortion, synthesis) stay on the command line.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import metrics as metrics_mod
from .errors import ValidationError
from .retrieval import (
    ArchiveIndex,
    FusionSpec,
    fuse_scores,
    query_embedding,
    rank_scores,
    score_archive,
)

DEFAULT_TOP_R = 10


class IndexLoadRequest(BaseModel):
    path: str


class IndexInfo(BaseModel):
    model_id: str
    dim: int
    scheme: str
    n_files: int
    has_segments: bool


class RetrieveRequest(BaseModel):
    query_file_id: Optional[str] = None
    vector: Optional[list[float]] = None
    mode: str = "speaker"
    top_r: int = Field(default=DEFAULT_TOP_R, ge=1)
    self_exclude: bool = True


class RankedEntry(BaseModel):
    rank: int
    file_id: str
    score: float


class RetrieveResponse(BaseModel):
    mode: str
    excluded: list[str]
    entries: list[RankedEntry]
    scores: dict[str, float]


class FuseRequest(BaseModel):
    scores_a: dict[str, float]
    scores_b: dict[str, float]
    lam: float = Field(default=0.5, ge=0.0, le=1.0)
    top_r: int = Field(default=DEFAULT_TOP_R, ge=1)


class FuseResponse(BaseModel):
    entries: list[RankedEntry]
    scores: dict[str, float]


class RprRequest(BaseModel):
    baseline: dict[int, float]
    distorted: dict[int, float]


class RprResponse(BaseModel):
    per_k: dict[int, Optional[float]]
    avg_rpr: float
    skipped_ks: list[int]


def create_app(index: ArchiveIndex | None = None) -> FastAPI:
    app = FastAPI(title="speaker-retrieval service")
    state: dict[str, ArchiveIndex | None] = {"index": index}

    def current_index() -> ArchiveIndex:
        loaded = state["index"]
        if loaded is None:
            raise HTTPException(status_code=409, detail="no index loaded")
        return loaded

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/index/load", response_model=IndexInfo)
    def index_load(request: IndexLoadRequest) -> IndexInfo:
        from .index_io import load_index

        try:
            with open(request.path, "rb") as handle:
                state["index"] = load_index(handle)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail=f"no such file: {request.path}")
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return index_info()

    @app.get("/index/info", response_model=IndexInfo)
    def index_info() -> IndexInfo:
        loaded = current_index()
        return IndexInfo(
            model_id=loaded.model_id,
            dim=loaded.dim,
            scheme=str(loaded.scheme),
            n_files=loaded.n_files,
            has_segments=loaded.has_segments,
        )

    @app.post("/retrieve", response_model=RetrieveResponse)
    def retrieve(request: RetrieveRequest) -> RetrieveResponse:
        loaded = current_index()
        try:
            if (request.query_file_id is None) == (request.vector is None):
                raise ValidationError(
                    "provide exactly one of query_file_id and vector"
                )
            exclude: frozenset[str] = frozenset()
            if request.query_file_id is not None:
                profiles = loaded.profiles_for(request.query_file_id)
                q = query_embedding(profiles)
                if request.self_exclude:
                    exclude = frozenset({request.query_file_id})
            else:
                import numpy as np

                q = np.asarray(request.vector, dtype=float)
            scores = score_archive(loaded, q, request.mode, exclude)
            ranked = rank_scores(
                scores, "request", request.mode, request.top_r, excluded=exclude
            )
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return RetrieveResponse(
            mode=request.mode,
            excluded=sorted(exclude),
            entries=[
                RankedEntry(rank=i, file_id=f, score=s)
                for i, (f, s) in enumerate(ranked.entries, start=1)
            ],
            scores=scores,
        )

    @app.post("/fuse", response_model=FuseResponse)
    def fuse(request: FuseRequest) -> FuseResponse:
        try:
            fused = fuse_scores(
                request.scores_a, request.scores_b, FusionSpec(lam=request.lam)
            )
            ranked = rank_scores(fused, "request", "speaker", request.top_r)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return FuseResponse(
            entries=[
                RankedEntry(rank=i, file_id=f, score=s)
                for i, (f, s) in enumerate(ranked.entries, start=1)
            ],
            scores=fused,
        )

    @app.post("/rpr", response_model=RprResponse)
    def rpr(request: RprRequest) -> RprResponse:
        try:
            ks = tuple(sorted(request.baseline))
            report = metrics_mod.avg_rpr(request.baseline, request.distorted, ks)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return RprResponse(
            per_k=report.per_k,
            avg_rpr=report.avg_rpr,
            skipped_ks=list(report.skipped_ks),
        )

    return app
