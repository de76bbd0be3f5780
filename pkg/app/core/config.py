from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

DEFAULT_FRAMES = 8
KLD_PATCH_SIZE = 7
CON_PATCH_SIZE = 8
NSV_RADIUS = 16
CAS_RANDOM_COUNT = 100
ISROC_DECAY_LENGTH = 25.0

Method = Literal["con", "kld"]
Switch = Literal["on", "off"]
MapFormat = Literal["pgm8", "raw64"]


def default_patch_size(method: str) -> int:
    return CON_PATCH_SIZE if method == "con" else KLD_PATCH_SIZE


class PipelineSettings(BaseModel):
    method: Method = "kld"
    patch_size: int | None = Field(default=None, ge=6, le=64)
    denoise: Switch = "on"
    pca: Switch = "off"
    frames: int = Field(default=DEFAULT_FRAMES, ge=4)
    nsv_radius: int = Field(default=NSV_RADIUS, ge=0)
    random_count: int = Field(default=CAS_RANDOM_COUNT, ge=1)
    seed: int = 0
    decay_length: float = Field(default=ISROC_DECAY_LENGTH, gt=0)
    format: MapFormat = "pgm8"

    @property
    def resolved_patch_size(self) -> int:
        return self.patch_size if self.patch_size is not None else default_patch_size(self.method)

    @property
    def denoise_enabled(self) -> bool:
        return self.denoise == "on"

    @property
    def pca_enabled(self) -> bool:
        return self.pca == "on"
