from __future__ import annotations

import logging
import os
import time
from collections.abc import Callable, Sequence

import numpy as np
import psutil

from app.core.kdp_entropy import estimate_joint_entropy
from app.core.saliency import score_patches, spatial_features
from app.models.domain import ImagePlane, SampleMatrix

logger = logging.getLogger(__name__)

SCALING_EXPONENTS = tuple(range(10, 21))
SCALING_DIMS = 5
SCENE_SHAPE = (544, 720)


def time_call(func: Callable[[], object], repeats: int = 1) -> list[float]:
    timings = []
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        func()
        timings.append(time.perf_counter() - start)
    return timings


def textured_scene(shape: tuple[int, int] = SCENE_SHAPE, seed: int = 0, amplitude: float = 0.1) -> ImagePlane:
    """Deterministic scene: smooth gradients, a few gratings and smoothed noise in [0, 1]."""
    rng = np.random.default_rng(seed)
    rows, cols = np.indices(shape, dtype=np.float64)
    scene = 0.5 + 0.2 * (rows / shape[0]) - 0.1 * (cols / shape[1])
    for period, angle in ((23.0, 0.3), (41.0, 1.2), (67.0, 2.1)):
        phase = (np.cos(angle) * cols + np.sin(angle) * rows) * (2.0 * np.pi / period)
        scene += amplitude * np.sin(phase)
    noise = rng.standard_normal(shape)
    kernel = np.ones(5) / 5.0
    noise = np.apply_along_axis(np.convolve, 0, noise, kernel, mode="same")
    noise = np.apply_along_axis(np.convolve, 1, noise, kernel, mode="same")
    scene += amplitude * noise
    return ImagePlane(np.clip(scene, 0.0, 1.0))


def method_timings(
    plane: ImagePlane, repeats: int = 5, patch_size: int | None = None, denoise: bool = True
) -> dict[str, float]:
    """Median patch-scoring time per method on a shared feature plane."""
    feature = spatial_features(plane, denoise)
    medians = {}
    for method in ("con", "kld"):
        timings = time_call(lambda: score_patches(feature, method, patch_size), repeats)
        medians[method] = float(np.median(timings))
        logger.debug("%s scoring: %s", method, ", ".join(f"{t:.4f}" for t in timings))
    return medians


def entropy_scaling(
    exponents: Sequence[int] = SCALING_EXPONENTS,
    dims: int = SCALING_DIMS,
    repeats: int = 3,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """Best-of-``repeats`` joint entropy time for N = 2^e uniform samples."""
    rng = np.random.default_rng(seed)
    rows = []
    for exponent in exponents:
        samples = SampleMatrix(rng.random((2**exponent, dims)))
        rows.append((2**exponent, min(time_call(lambda: estimate_joint_entropy(samples), repeats))))
    return rows


def loglog_slope(rows: Sequence[tuple[int, float]]) -> float:
    sizes = np.log([row[0] for row in rows])
    seconds = np.log([max(row[1], 1e-9) for row in rows])
    return float(np.polyfit(sizes, seconds, 1)[0])


def resident_memory_mb() -> float:
    return psutil.Process(os.getpid()).memory_info().rss / (1024 * 1024)
