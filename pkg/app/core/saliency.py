from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from app.core.config import DEFAULT_FRAMES, default_patch_size
from app.core.decorrelate import PCA_TARGET_ENERGY, dct_temporal_decorrelate, pca_fit, pca_project
from app.core.errors import AdmissibilityError, InputError
from app.core.kdp_entropy import estimate_conditional_entropy, estimate_kl_divergence
from app.core.wavelet_msf import (
    WAVELET_LEVELS,
    bivariate_shrink,
    cdf97_forward,
    cdf97_inverse,
    estimate_noise_sigma,
    msf_denoised,
    msf_filter,
)
from app.models.domain import (
    CENTER,
    SURROUND,
    FrameStack,
    ImagePlane,
    PcaModel,
    SaliencyMap,
    SampleMatrix,
    TemporalFeatureStack,
)

logger = logging.getLogger(__name__)

FLAT_TOLERANCE = 1e-9
METHODS = ("con", "kld")

# Block offsets (dy, dx), surround first, center last.
FOUR_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))
EIGHT_NEIGHBORS = FOUR_NEIGHBORS + ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class RawScores:
    values: np.ndarray
    tile_scores: np.ndarray
    patch_size: int
    degenerate_count: int
    negative_count: int

    @property
    def patch_count(self) -> int:
        return int(self.tile_scores.size)


def _check_method(method: str) -> str:
    normalized = method.strip().lower()
    if normalized not in METHODS:
        raise InputError(f"Unknown saliency method '{method}'; use con or kld.")
    return normalized


def _resolve_patch_size(method: str, patch_size: int | None) -> int:
    return default_patch_size(method) if patch_size is None else int(patch_size)


def _offsets(neighbors: int) -> tuple[tuple[int, int], ...]:
    if neighbors == 4:
        return FOUR_NEIGHBORS
    if neighbors == 8:
        return EIGHT_NEIGHBORS
    raise InputError("Neighborhood must have 4 or 8 surrounding blocks.")


def _check_admissible_patch(patch_size: int, n_dims: int) -> None:
    if patch_size * patch_size < 2**n_dims:
        raise AdmissibilityError(
            f"Patch size {patch_size} gives {patch_size * patch_size} samples, "
            f"fewer than 2^{n_dims} for {n_dims} dimensions."
        )


def _pad(values: np.ndarray, patch_size: int) -> np.ndarray:
    # one block on every side, one more on the far edges for partial tiles
    return np.pad(values, ((patch_size, 2 * patch_size), (patch_size, 2 * patch_size)), mode="symmetric")


def _tile_grid(shape: tuple[int, int], patch_size: int) -> tuple[int, int]:
    return math.ceil(shape[0] / patch_size), math.ceil(shape[1] / patch_size)


def _block_samples(
    padded: np.ndarray, shape: tuple[int, int], patch_size: int, dy: int, dx: int
) -> np.ndarray:
    rows, cols = _tile_grid(shape, patch_size)
    top = patch_size + dy * patch_size
    left = patch_size + dx * patch_size
    region = padded[top : top + rows * patch_size, left : left + cols * patch_size]
    blocks = region.reshape(rows, patch_size, cols, patch_size).transpose(0, 2, 1, 3)
    return blocks.reshape(rows, cols, patch_size * patch_size)


def _neighborhood_blocks(
    feature: np.ndarray, patch_size: int, offsets: tuple[tuple[int, int], ...]
) -> np.ndarray:
    """Sample matrices of every tile at once: (rows, cols, P*P, len(offsets) + 1)."""
    padded = _pad(feature, patch_size)
    columns = [_block_samples(padded, feature.shape, patch_size, dy, dx) for dy, dx in offsets]
    columns.append(_block_samples(padded, feature.shape, patch_size, 0, 0))
    return np.stack(columns, axis=-1)


def extract_neighborhood(
    plane: ImagePlane,
    patch_origin: tuple[int, int],
    patch_size: int,
    neighbors: int = 4,
) -> SampleMatrix:
    """Co-located pixels of the center block and its neighbors.

    ``patch_origin`` is the (x, y) top-left pixel of the center block. Columns
    are ordered n, s, w, e (then nw, ne, sw, se for 8 neighbors) and c last.
    """
    offsets = _offsets(neighbors)
    _check_admissible_patch(patch_size, len(offsets) + 1)
    x, y = patch_origin
    if not (0 <= x < plane.width and 0 <= y < plane.height):
        raise InputError(f"Patch origin ({x}, {y}) is outside the {plane.width}x{plane.height} plane.")

    padded = _pad(plane.values, patch_size)
    columns = []
    for dy, dx in offsets + ((0, 0),):
        top = y + patch_size + dy * patch_size
        left = x + patch_size + dx * patch_size
        columns.append(padded[top : top + patch_size, left : left + patch_size].ravel())
    roles = (SURROUND,) * len(offsets) + (CENTER,)
    return SampleMatrix(np.column_stack(columns), roles)


def _is_flat(samples: np.ndarray, columns: slice | list[int]) -> bool:
    return bool(np.all(np.ptp(samples[:, columns], axis=0) <= FLAT_TOLERANCE))


def _score(samples: SampleMatrix, method: str) -> float:
    if method == "con":
        return estimate_conditional_entropy(samples)
    return estimate_kl_divergence(samples)


def _score_tiles(
    blocks: np.ndarray,
    method: str,
    flat_columns: slice,
    project: PcaModel | None = None,
) -> tuple[np.ndarray, int, int]:
    rows, cols, _, n_dims = blocks.shape
    scores = np.zeros((rows, cols), dtype=np.float64)
    degenerate = negative = 0
    for ty in range(rows):
        for tx in range(cols):
            samples = blocks[ty, tx]
            if _is_flat(samples, flat_columns):
                degenerate += 1
                continue
            if project is not None:
                surround = pca_project(project, SampleMatrix(samples[:, :-1])).values
                samples = np.column_stack((surround, samples[:, -1]))
            roles = (SURROUND,) * (samples.shape[1] - 1) + (CENTER,)
            value = _score(SampleMatrix(samples, roles), method)
            scores[ty, tx] = value
            if value < 0.0:
                negative += 1
    return scores, degenerate, negative


def _broadcast(tile_scores: np.ndarray, shape: tuple[int, int], patch_size: int) -> np.ndarray:
    expanded = np.repeat(np.repeat(tile_scores, patch_size, axis=0), patch_size, axis=1)
    return expanded[: shape[0], : shape[1]]


def normalize_map(raw: np.ndarray) -> np.ndarray:
    """Global min-max to [0, 1]; a constant map becomes all zeros."""
    values = np.asarray(raw, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if not high > low:
        return np.zeros_like(values)
    return np.clip((values - low) / (high - low), 0.0, 1.0)


def spatial_features(plane: ImagePlane, denoise: bool = True) -> ImagePlane:
    return msf_denoised(plane) if denoise else msf_filter(plane)


def _capped_model(model: PcaModel, patch_size: int) -> PcaModel:
    limit = max(1, int(math.log2(patch_size * patch_size)) - 1)
    if model.n_components <= limit:
        return model
    logger.warning(
        "PCA keeps %d components but a %dx%d patch supports only %d; truncating.",
        model.n_components,
        patch_size,
        patch_size,
        limit,
    )
    total = float(model.eigenvalues.sum()) / model.energy_fraction
    kept = model.eigenvalues[:limit]
    return replace(
        model,
        basis=model.basis[:, :limit],
        eigenvalues=kept,
        energy_fraction=float(kept.sum() / total),
    )


def _surround_model(feature: np.ndarray, patch_size: int) -> PcaModel:
    padded = _pad(feature, patch_size)
    height, width = feature.shape
    columns = []
    for dy, dx in EIGHT_NEIGHBORS:
        top = patch_size + dy * patch_size
        left = patch_size + dx * patch_size
        columns.append(padded[top : top + height, left : left + width].ravel())
    model = pca_fit(SampleMatrix(np.column_stack(columns)), PCA_TARGET_ENERGY)
    return _capped_model(model, patch_size)


def score_patches(
    feature: ImagePlane,
    method: str = "kld",
    patch_size: int | None = None,
    pca: bool = False,
) -> RawScores:
    """Per-tile scores of an already filtered feature plane."""
    method = _check_method(method)
    patch_size = _resolve_patch_size(method, patch_size)
    offsets = EIGHT_NEIGHBORS if pca else FOUR_NEIGHBORS
    model = None
    if pca and np.ptp(feature.values) > FLAT_TOLERANCE:
        model = _surround_model(feature.values, patch_size)
        _check_admissible_patch(patch_size, model.n_components + 1)
    elif not pca:
        _check_admissible_patch(patch_size, len(offsets) + 1)

    blocks = _neighborhood_blocks(feature.values, patch_size, offsets)
    tile_scores, degenerate, negative = _score_tiles(blocks, method, slice(None), model)
    logger.debug(
        "Scored %d patches (%s, P=%d): %d degenerate, %d negative.",
        tile_scores.size,
        method,
        patch_size,
        degenerate,
        negative,
    )
    return RawScores(
        values=_broadcast(tile_scores, feature.shape, patch_size),
        tile_scores=tile_scores,
        patch_size=patch_size,
        degenerate_count=degenerate,
        negative_count=negative,
    )


def raw_spatial_scores(
    plane: ImagePlane,
    method: str = "kld",
    patch_size: int | None = None,
    denoise: bool = True,
    pca: bool = False,
) -> RawScores:
    return score_patches(spatial_features(plane, denoise), method, patch_size, pca)


def spatial_saliency(
    plane: ImagePlane,
    method: str = "kld",
    patch_size: int | None = None,
    denoise: bool = True,
    pca: bool = False,
) -> SaliencyMap:
    raw = raw_spatial_scores(plane, method, patch_size, denoise, pca)
    return SaliencyMap(normalize_map(raw.values), method=method.upper(), kind="spatial")


def _check_frames(stack: FrameStack, frames: int) -> None:
    if len(stack) != frames:
        raise InputError(f"Expected {frames} frames, got {len(stack)}.")


def temporal_features(
    stack: FrameStack, denoise: bool = True
) -> tuple[ImagePlane, TemporalFeatureStack]:
    if not denoise:
        features = FrameStack(tuple(msf_filter(frame) for frame in stack.frames), stack.period)
        return features.latest, dct_temporal_decorrelate(features)

    sigmas = [estimate_noise_sigma(cdf97_forward(frame, WAVELET_LEVELS)) for frame in stack.frames]
    noise_sigma = float(np.median(sigmas))
    features = FrameStack(
        tuple(msf_denoised(frame, noise_sigma) for frame in stack.frames), stack.period
    )
    retained = dct_temporal_decorrelate(features)
    # planes come from MSF features; shrink only
    planes = tuple(
        cdf97_inverse(bivariate_shrink(cdf97_forward(plane, WAVELET_LEVELS), noise_sigma=noise_sigma))
        for plane in retained.planes
    )
    return features.latest, TemporalFeatureStack(planes=planes, basis_index=retained.basis_index)


def raw_temporal_scores(
    stack: FrameStack,
    method: str = "kld",
    patch_size: int | None = None,
    denoise: bool = True,
    frames: int = DEFAULT_FRAMES,
) -> RawScores:
    method = _check_method(method)
    patch_size = _resolve_patch_size(method, patch_size)
    _check_frames(stack, frames)
    center, context = temporal_features(stack, denoise)
    _check_admissible_patch(patch_size, context.n_bases + 1)

    padded = [_pad(plane.values, patch_size) for plane in context.planes]
    padded.append(_pad(center.values, patch_size))
    blocks = np.stack(
        [_block_samples(grid, center.shape, patch_size, 0, 0) for grid in padded], axis=-1
    )
    # no motion when every temporal-context column is flat
    tile_scores, degenerate, negative = _score_tiles(blocks, method, slice(0, -1))
    logger.debug(
        "Temporal scores over %d patches with bases %s: %d degenerate.",
        tile_scores.size,
        list(context.basis_index),
        degenerate,
    )
    return RawScores(
        values=_broadcast(tile_scores, center.shape, patch_size),
        tile_scores=tile_scores,
        patch_size=patch_size,
        degenerate_count=degenerate,
        negative_count=negative,
    )


def temporal_saliency(
    stack: FrameStack,
    method: str = "kld",
    patch_size: int | None = None,
    denoise: bool = True,
    frames: int = DEFAULT_FRAMES,
) -> SaliencyMap:
    raw = raw_temporal_scores(stack, method, patch_size, denoise, frames)
    return SaliencyMap(normalize_map(raw.values), method=method.upper(), kind="temporal")


def spatiotemporal_saliency(
    stack: FrameStack,
    method: str = "kld",
    patch_size: int | None = None,
    denoise: bool = True,
    frames: int = DEFAULT_FRAMES,
    pca: bool = False,
) -> SaliencyMap:
    """Raw spatial map of the latest frame plus the raw temporal map, normalized once."""
    temporal = raw_temporal_scores(stack, method, patch_size, denoise, frames)
    spatial = raw_spatial_scores(stack.latest, method, patch_size, denoise, pca)
    return SaliencyMap(
        normalize_map(spatial.values + temporal.values),
        method=method.upper(),
        kind="spatiotemporal",
    )


def bias_ratio(plane: ImagePlane, patch_size: int = 7, denoise: bool = True) -> float:
    """Share of patches whose raw KL estimate is negative; flat patches never count."""
    raw = raw_spatial_scores(plane, "kld", patch_size, denoise)
    return raw.negative_count / raw.patch_count
