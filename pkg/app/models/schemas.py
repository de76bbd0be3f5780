from __future__ import annotations

from pydantic import BaseModel, Field

from app.core.config import Method, Switch


class EntropyRequest(BaseModel):
    values: list[list[float]]
    roles: str | None = None
    method: Method = "kld"


class EntropyResponse(BaseModel):
    nats: float


class SpatialMapRequest(BaseModel):
    plane: list[list[float]]
    method: Method = "kld"
    patchSize: int | None = Field(default=None, ge=6, le=64)
    denoise: Switch = "on"


class SaliencyMapResponse(BaseModel):
    width: int
    height: int
    method: str
    kind: str
    values: list[list[float]]


class FixationInput(BaseModel):
    x: float
    y: float


class RocRequest(BaseModel):
    map: list[list[float]]
    fixations: list[FixationInput] = Field(default_factory=list)


class RocResponse(BaseModel):
    auc: float


class NormXCorrRequest(BaseModel):
    map: list[list[float]]
    importance: list[list[float]]


class NormXCorrResponse(BaseModel):
    normxcorr: float


class PerformanceResponse(BaseModel):
    time: str
    memory: str
    threads: int
