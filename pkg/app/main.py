from __future__ import annotations

import threading
import time

from fastapi import FastAPI, HTTPException, Request

from app.core.bench import resident_memory_mb
from app.core.errors import SaliencyError
from app.core.evaluation import auc, normxcorr, roc_curve
from app.core.kdp_entropy import (
    estimate_conditional_entropy,
    estimate_joint_entropy,
    estimate_kl_divergence,
)
from app.core.saliency import spatial_saliency
from app.models.domain import FixationRecord, FixationSet, ImagePlane, SaliencyMap, SampleMatrix, parse_roles
from app.models.schemas import (
    EntropyRequest,
    EntropyResponse,
    NormXCorrRequest,
    NormXCorrResponse,
    PerformanceResponse,
    RocRequest,
    RocResponse,
    SaliencyMapResponse,
    SpatialMapRequest,
)

app = FastAPI(
    title="Center-Surround Saliency API",
    version="1.0.0",
)

app.state.last_request_ms = 0.0


@app.middleware("http")
async def collect_request_metrics(request: Request, call_next):
    start_time = time.perf_counter()
    response = await call_next(request)
    app.state.last_request_ms = (time.perf_counter() - start_time) * 1000.0
    return response


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/saliency/v1/entropy", response_model=EntropyResponse)
def entropy_endpoint(payload: EntropyRequest) -> EntropyResponse:
    try:
        if payload.roles is None:
            nats = estimate_joint_entropy(SampleMatrix(payload.values))
        else:
            samples = SampleMatrix(payload.values, parse_roles(payload.roles))
            if payload.method == "con":
                nats = estimate_conditional_entropy(samples)
            else:
                nats = estimate_kl_divergence(samples)
    except SaliencyError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return EntropyResponse(nats=nats)


@app.post("/saliency/v1/maps:spatial", response_model=SaliencyMapResponse)
def spatial_map_endpoint(payload: SpatialMapRequest) -> SaliencyMapResponse:
    try:
        saliency = spatial_saliency(
            ImagePlane(payload.plane),
            method=payload.method,
            patch_size=payload.patchSize,
            denoise=payload.denoise == "on",
        )
    except SaliencyError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return SaliencyMapResponse(
        width=saliency.width,
        height=saliency.height,
        method=saliency.method,
        kind=saliency.kind,
        values=saliency.values.tolist(),
    )


@app.post("/saliency/v1/metrics:roc", response_model=RocResponse)
def roc_endpoint(payload: RocRequest) -> RocResponse:
    try:
        saliency = SaliencyMap(payload.map, method="external", kind="spatial")
        fixations = FixationSet(tuple(FixationRecord(0, f.x, f.y) for f in payload.fixations))
        value = auc(roc_curve(saliency, fixations, frame=0))
    except SaliencyError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return RocResponse(auc=value)


@app.post("/saliency/v1/metrics:normxcorr", response_model=NormXCorrResponse)
def normxcorr_endpoint(payload: NormXCorrRequest) -> NormXCorrResponse:
    try:
        value = normxcorr(ImagePlane(payload.map).values, ImagePlane(payload.importance).values)
    except SaliencyError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return NormXCorrResponse(normxcorr=value)


@app.get("/saliency/v1/performance", response_model=PerformanceResponse)
def performance_report() -> PerformanceResponse:
    return PerformanceResponse(
        time=f"{app.state.last_request_ms:.3f} ms",
        memory=f"{resident_memory_mb():.2f} MB",
        threads=threading.active_count(),
    )
