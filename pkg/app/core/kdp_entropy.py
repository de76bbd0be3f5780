from __future__ import annotations

import functools
import logging
import math

import numpy as np

from app.core.errors import AdmissibilityError, InputError
from app.models.domain import CENTER, SURROUND, Partition, PartitionCell, SampleMatrix

logger = logging.getLogger(__name__)

EPSILON = 1e-12
MIN_SPLIT_COUNT = 4
LN2 = math.log(2.0)


def partition_depth(n_samples: int) -> int:
    if n_samples < 1:
        raise InputError("Sample count must be positive.")
    return (int(n_samples).bit_length() - 1) // 2


def _check_admissible(n_samples: int, n_dims: int) -> None:
    if n_samples < 2**n_dims:
        raise AdmissibilityError(
            f"{n_samples} samples cannot support {n_dims} dimensions (need >= {2**n_dims})."
        )


def _leaf_boxes(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # leaves in depth-first order, one row of (lo, hi) each
    n_samples, n_dims = values.shape
    max_depth = partition_depth(n_samples)
    root_lo = values.min(axis=0)
    root_hi = values.max(axis=0)

    counts: list[int] = []
    lows: list[np.ndarray] = []
    highs: list[np.ndarray] = []
    # each node owns a contiguous copy of its rows
    stack = [(values, root_lo, root_hi, 0)]
    while stack:
        block, lo, hi, depth = stack.pop()
        size = block.shape[0]
        if depth >= max_depth or size < MIN_SPLIT_COUNT:
            counts.append(size)
            lows.append(lo)
            highs.append(hi)
            continue

        dim = depth % n_dims
        column = block[:, dim]
        kth = (size - 1) // 2
        order = np.argpartition(column, kth)
        split = column[order[kth]]
        half = size // 2

        left_hi = hi.copy()
        left_hi[dim] = split
        right_lo = lo.copy()
        right_lo[dim] = split
        # right pushed first so leaves come out left-to-right
        stack.append((block[order[half:]], right_lo, hi, depth + 1))
        stack.append((block[order[:half]], lo, left_hi, depth + 1))

    return (
        np.asarray(counts, dtype=np.int64),
        np.vstack(lows),
        np.vstack(highs),
    )


def build_partition(samples: SampleMatrix) -> Partition:
    _check_admissible(samples.n_samples, samples.n_dims)
    counts, lo, hi = _leaf_boxes(samples.values)
    volumes = np.prod(_clamped_extents(lo, hi), axis=1)
    cells = tuple(
        PartitionCell(
            bounds=np.column_stack((lo[i], hi[i])), count=int(counts[i]), volume=float(volumes[i])
        )
        for i in range(counts.size)
    )
    root = np.column_stack((samples.values.min(axis=0), samples.values.max(axis=0)))
    return Partition(cells=cells, root_bounds=root, depth=partition_depth(samples.n_samples))


def _clamped_extents(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.maximum(hi - lo, EPSILON)


def _joint_entropy(values: np.ndarray) -> float:
    n_samples = values.shape[0]
    counts, lo, hi = _leaf_boxes(values)
    log_volume = np.log(_clamped_extents(lo, hi)).sum(axis=1)
    weights = counts / n_samples
    return float(np.sum(weights * (np.log(n_samples / counts) + log_volume)))


def estimate_joint_entropy(samples: SampleMatrix) -> float:
    """Differential entropy in nats; may be negative."""
    _check_admissible(samples.n_samples, samples.n_dims)
    return _joint_entropy(samples.values)


def estimate_entropy_bits(samples: SampleMatrix) -> float:
    return estimate_joint_entropy(samples) / LN2


def _role_columns(samples: SampleMatrix) -> tuple[list[int], list[int]]:
    if samples.dim_roles is None:
        raise InputError("Role tags are required (surround/center per dimension).")
    surround = [i for i, role in enumerate(samples.dim_roles) if role == SURROUND]
    center = [i for i, role in enumerate(samples.dim_roles) if role == CENTER]
    if not surround or not center:
        raise InputError("Need at least one surround and one center dimension.")
    return surround, center


def estimate_conditional_entropy(samples: SampleMatrix) -> float:
    surround, _ = _role_columns(samples)
    _check_admissible(samples.n_samples, samples.n_dims)
    joint = _joint_entropy(samples.values)
    marginal = _joint_entropy(samples.values[:, surround])
    return joint - marginal


@functools.lru_cache(maxsize=64)
def _marginal_leaves(n_samples: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leaf (count, low rank, high rank) of a 1-D median split of N sorted samples."""
    max_depth = partition_depth(n_samples)
    counts: list[int] = []
    low_ranks: list[int] = []
    high_ranks: list[int] = []
    stack = [(0, n_samples, 0, n_samples - 1, 0)]
    while stack:
        start, stop, low, high, depth = stack.pop()
        size = stop - start
        if depth >= max_depth or size < MIN_SPLIT_COUNT:
            counts.append(size)
            low_ranks.append(low)
            high_ranks.append(high)
            continue
        split = start + (size - 1) // 2
        half = start + size // 2
        stack.append((half, stop, split, high, depth + 1))
        stack.append((start, half, low, split, depth + 1))
    return (
        np.asarray(counts, dtype=np.int64),
        np.asarray(low_ranks, dtype=np.int64),
        np.asarray(high_ranks, dtype=np.int64),
    )


def estimate_kl_divergence(samples: SampleMatrix) -> float:
    """Center-vs-surround divergence, in nats per dimension.

    Every column is median-split on its own to the same depth, so all
    columns share leaf counts. Per leaf, the mean log width of the center
    columns minus that of the surround columns is weighted by the leaf's
    share of samples. Identically distributed columns give zero in
    expectation at any scale; negative values are returned unchanged.
    """
    surround, center = _role_columns(samples)
    if max(surround) > min(center):
        raise InputError("Surround dimensions must precede center dimensions.")
    _check_admissible(samples.n_samples, samples.n_dims)

    counts, low_ranks, high_ranks = _marginal_leaves(samples.n_samples)
    ordered = np.sort(samples.values, axis=0)
    log_widths = np.log(np.maximum(ordered[high_ranks] - ordered[low_ranks], EPSILON))
    log_ratio = log_widths[:, center].mean(axis=1) - log_widths[:, surround].mean(axis=1)
    return float(np.sum((counts / samples.n_samples) * log_ratio))
