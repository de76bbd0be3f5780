from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence

import numpy as np
from sklearn import metrics

from app.core.errors import InputError, UndefinedError
from app.core.saliency import normalize_map
from app.models.domain import FixationRecord, FixationSet, ImportanceMap, RocCurve, SaliencyMap

logger = logging.getLogger(__name__)

ROC_LEVELS = 256
NSV_RADIUS = 16
CAS_RANDOM_COUNT = 100
ISROC_DECAY = 25.0
IMPORTANCE_SCALE = 32


def _grid(saliency: SaliencyMap | ImportanceMap | np.ndarray) -> np.ndarray:
    values = getattr(saliency, "values", saliency)
    return np.asarray(values, dtype=np.float64)


def _pixel(record: FixationRecord) -> tuple[int, int]:
    return int(np.floor(record.y + 0.5)), int(np.floor(record.x + 0.5))


def _inside(row: int, col: int, shape: tuple[int, int]) -> bool:
    return 0 <= row < shape[0] and 0 <= col < shape[1]


def _frame_pixels(
    fixations: FixationSet, frame: int, shape: tuple[int, int]
) -> list[tuple[int, int]]:
    pixels = []
    for record in fixations.for_frame(frame):
        row, col = _pixel(record)
        if not _inside(row, col, shape):
            logger.warning(
                "Fixation (%.2f, %.2f) lies outside the %dx%d frame %d; skipped.",
                record.x,
                record.y,
                shape[1],
                shape[0],
                frame,
            )
            continue
        pixels.append((row, col))
    return pixels


def fixation_mask(fixations: FixationSet, frame: int, shape: tuple[int, int]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for row, col in _frame_pixels(fixations, frame, shape):
        mask[row, col] = True
    return mask


def fixation_map(
    fixations: FixationSet,
    frame: int,
    shape: tuple[int, int],
    decay_length: float = ISROC_DECAY,
) -> np.ndarray:
    """Sum of exp(-d / decay_length) kernels around each fixation, scaled to [0, 1]."""
    if decay_length <= 0:
        raise InputError("Decay length must be positive.")
    rows, cols = np.indices(shape, dtype=np.float64)
    density = np.zeros(shape, dtype=np.float64)
    for row, col in _frame_pixels(fixations, frame, shape):
        density += np.exp(-np.hypot(rows - row, cols - col) / decay_length)
    return normalize_map(density)


def _roc_from_mask(values: np.ndarray, positives: np.ndarray) -> RocCurve:
    n_pos = int(positives.sum())
    n_neg = int(positives.size - n_pos)
    if n_pos == 0:
        raise InputError("No fixations in this frame.")
    if n_neg == 0:
        raise InputError("Every pixel is a fixation; no negatives to score.")

    levels = np.linspace(0.0, 1.0, ROC_LEVELS)
    pos_values = values[positives]
    neg_values = values[~positives]
    tpr = np.array([np.count_nonzero(pos_values >= level) for level in levels]) / n_pos
    fpr = np.array([np.count_nonzero(neg_values >= level) for level in levels]) / n_neg
    return RocCurve(
        false_positive_rates=np.append(fpr, 0.0),
        true_positive_rates=np.append(tpr, 0.0),
        thresholds=np.append(levels, np.inf),
    )


def roc_curve(saliency: SaliencyMap | np.ndarray, fixations: FixationSet, frame: int) -> RocCurve:
    """256 thresholds over [0, 1] and a terminal (0, 0); starts at (1, 1)."""
    values = _grid(saliency)
    return _roc_from_mask(values, fixation_mask(fixations, frame, values.shape))


def auc(curve: RocCurve) -> float:
    if curve.false_positive_rates.size < 2:
        raise InputError("A ROC curve needs at least two points.")
    return float(metrics.auc(curve.false_positive_rates, curve.true_positive_rates))


def intersubject_roc(
    per_subject_fixations: Sequence[FixationSet],
    shape: tuple[int, int],
    frame: int,
    decay_length: float = ISROC_DECAY,
) -> float:
    """Leave-one-subject-out AUC of the other subjects' fixation map, averaged."""
    if len(per_subject_fixations) < 2:
        raise InputError("Inter-subject ROC needs at least two subjects.")

    scores = []
    for held_out, subject in enumerate(per_subject_fixations):
        mask = fixation_mask(subject, frame, shape)
        if not mask.any():
            continue
        others = FixationSet(
            tuple(
                record
                for index, other in enumerate(per_subject_fixations)
                if index != held_out
                for record in other.for_frame(frame)
            )
        )
        if not others.records:
            continue
        reference = fixation_map(others, frame, shape, decay_length)
        scores.append(auc(_roc_from_mask(reference, mask)))
    if not scores:
        raise InputError(f"Frame {frame} lacks fixations from at least two subjects.")
    return float(np.mean(scores))


def nsv(saliency: SaliencyMap | np.ndarray, fixation: tuple[float, float], radius: int = NSV_RADIUS) -> float:
    """Max of the map over the (2r+1) square around ``fixation`` (x, y), clipped to the map."""
    values = _grid(saliency)
    if radius < 0:
        raise InputError("NSV radius must be non-negative.")
    x, y = fixation
    row, col = _pixel(FixationRecord(0, x, y))
    if not _inside(row, col, values.shape):
        raise InputError(f"Fixation ({x}, {y}) is outside the {values.shape[1]}x{values.shape[0]} map.")
    window = values[
        max(row - radius, 0) : row + radius + 1,
        max(col - radius, 0) : col + radius + 1,
    ]
    return float(window.max())


def mean_nsv(
    saliency: SaliencyMap | np.ndarray,
    fixations: FixationSet,
    frame: int,
    radius: int = NSV_RADIUS,
) -> float:
    records = fixations.for_frame(frame)
    if not records:
        raise InputError(f"No fixations in frame {frame}.")
    return float(np.mean([nsv(saliency, (r.x, r.y), radius) for r in records]))


def cas(
    saliency: SaliencyMap | np.ndarray,
    fixations: FixationSet,
    frame: int,
    radius: int = NSV_RADIUS,
    n_random: int = CAS_RANDOM_COUNT,
    seed: int = 0,
) -> float:
    """Mean NSV at human fixations minus mean NSV at seeded uniform random fixations."""
    if n_random < 1:
        raise InputError("Random fixation count must be >= 1.")
    values = _grid(saliency)
    human = mean_nsv(values, fixations, frame, radius)
    if np.ptp(values) == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, values.shape[1], size=n_random)
    ys = rng.integers(0, values.shape[0], size=n_random)
    chance = float(np.mean([nsv(values, (float(x), float(y)), radius) for x, y in zip(xs, ys)]))
    return human - chance


def normxcorr(
    saliency: SaliencyMap | np.ndarray, importance: ImportanceMap | np.ndarray
) -> float:
    a = _grid(saliency)
    b = _grid(importance)
    if a.shape != b.shape:
        raise InputError(f"Map shapes differ: {a.shape} vs {b.shape}.")
    a_constant = np.ptp(a) == 0.0
    b_constant = np.ptp(b) == 0.0
    if a_constant and b_constant:
        raise UndefinedError("Both maps are constant; correlation is undefined.")
    if a_constant or b_constant:
        return 0.0
    a0 = a - a.mean()
    b0 = b - b.mean()
    value = float(np.sum(a0 * b0) / np.sqrt(np.sum(a0 * a0) * np.sum(b0 * b0)))
    return min(1.0, max(-1.0, value))


def importance_from_labels(label_map: np.ndarray, table: Mapping[int, int]) -> ImportanceMap:
    labels = np.asarray(label_map)
    ids = np.unique(labels)
    missing = [int(i) for i in ids if int(i) not in table]
    if missing:
        raise InputError(f"Class id(s) {', '.join(map(str, missing))} not in the importance table.")
    lookup = np.zeros(int(ids.max()) + 1, dtype=np.float64)
    for class_id in ids:
        lookup[int(class_id)] = table[int(class_id)]
    return ImportanceMap(lookup[labels.astype(np.int64)] / IMPORTANCE_SCALE)


def summarize(values: Sequence[float]) -> tuple[float, float]:
    if len(values) == 0:
        raise InputError("Nothing to summarize.")
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.var())
