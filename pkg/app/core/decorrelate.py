from __future__ import annotations

import logging

import numpy as np
from scipy import fft

from app.core.errors import InputError
from app.models.domain import FrameStack, ImagePlane, PcaModel, SampleMatrix, TemporalFeatureStack

logger = logging.getLogger(__name__)

PCA_TARGET_ENERGY = 0.998
MIN_TEMPORAL_FRAMES = 4
_EIGEN_FLOOR = 1e-12


def pca_fit(patch_vectors: SampleMatrix, target_energy: float = PCA_TARGET_ENERGY) -> PcaModel:
    """Fewest components reaching ``target_energy``; near-zero eigenvalues are never kept."""
    if not 0.0 < target_energy <= 1.0:
        raise InputError("Target energy must lie in (0, 1].")
    n_samples, n_dims = patch_vectors.n_samples, patch_vectors.n_dims
    if n_samples <= n_dims:
        raise InputError(f"PCA needs more samples than dimensions ({n_samples} <= {n_dims}).")

    mean = patch_vectors.values.mean(axis=0)
    covariance = np.atleast_2d(np.cov(patch_vectors.values, rowvar=False))
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    eigenvectors = eigenvectors[:, order]

    total = float(eigenvalues.sum())
    if total <= 0.0:
        raise InputError("Patch vectors have zero variance.")
    positive = int(np.count_nonzero(eigenvalues > _EIGEN_FLOOR * eigenvalues[0]))
    cumulative = np.cumsum(eigenvalues[:positive]) / total
    k = int(np.searchsorted(cumulative, target_energy - 1e-12) + 1)
    k = max(1, min(k, positive))

    kept = eigenvalues[:k]
    logger.debug("PCA keeps %d of %d components (%.6f energy).", k, n_dims, kept.sum() / total)
    return PcaModel(
        mean=mean,
        basis=eigenvectors[:, :k],
        eigenvalues=kept,
        energy_fraction=float(kept.sum() / total),
    )


def pca_project(model: PcaModel, patch_vectors: SampleMatrix) -> SampleMatrix:
    if patch_vectors.n_dims != model.n_dims:
        raise InputError(
            f"Vectors have {patch_vectors.n_dims} dimensions, model expects {model.n_dims}."
        )
    return SampleMatrix((patch_vectors.values - model.mean) @ model.basis)


def pca_reconstruct(model: PcaModel, coords: SampleMatrix) -> SampleMatrix:
    if coords.n_dims != model.n_components:
        raise InputError(
            f"Coordinates have {coords.n_dims} components, model has {model.n_components}."
        )
    return SampleMatrix(coords.values @ model.basis.T + model.mean)


def temporal_dct(stack: FrameStack) -> np.ndarray:
    return fft.dct(stack.as_array(), type=2, norm="ortho", axis=0)


def inverse_temporal_dct(coefficients: np.ndarray) -> FrameStack:
    block = np.asarray(coefficients, dtype=np.float64)
    if block.ndim != 3:
        raise InputError("Temporal coefficients must be a T x H x W block.")
    frames = fft.idct(block, type=2, norm="ortho", axis=0)
    return FrameStack(tuple(ImagePlane(frame) for frame in frames))


def dct_temporal_decorrelate(stack: FrameStack) -> TemporalFeatureStack:
    """Keep energy ranks 2..T/2 of the temporal DCT bases (3 planes for T = 8)."""
    n_frames = len(stack)
    if n_frames < MIN_TEMPORAL_FRAMES:
        raise InputError(
            f"Temporal decorrelation needs at least {MIN_TEMPORAL_FRAMES} frames, got {n_frames}."
        )
    coefficients = temporal_dct(stack)
    energy = np.square(coefficients).sum(axis=(1, 2))
    ranked = np.argsort(-energy, kind="stable")
    retained = ranked[1 : n_frames // 2]
    logger.debug("Temporal DCT keeps bases %s of %d.", retained.tolist(), n_frames)
    return TemporalFeatureStack(
        planes=tuple(ImagePlane(coefficients[index]) for index in retained),
        basis_index=tuple(int(index) for index in retained),
    )
