from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from app.core.errors import InputError, SaliencyError

SURROUND = "surround"
CENTER = "center"
ROLE_CODES = {"s": SURROUND, "c": CENTER}


def _as_array(values: object, name: str) -> np.ndarray:
    try:
        return np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} must be a rectangular grid of numbers.") from exc


def _as_grid(values: object, name: str) -> np.ndarray:
    grid = _as_array(values, name)
    if grid.ndim != 2:
        raise InputError(f"{name} must be a 2-D grid, got {grid.ndim} dimension(s).")
    if grid.shape[0] < 1 or grid.shape[1] < 1:
        raise InputError(f"{name} must be at least 1x1.")
    if not np.all(np.isfinite(grid)):
        raise InputError(f"{name} contains non-finite values.")
    return grid


def parse_roles(code: str) -> tuple[str, ...]:
    """Turn a compact role string such as ``"ssssc"`` into role tags."""
    try:
        return tuple(ROLE_CODES[char] for char in code.strip().lower())
    except KeyError as exc:
        raise InputError(f"Unknown role code {exc.args[0]!r}; use 's' or 'c'.") from exc


@dataclass(frozen=True)
class SampleMatrix:
    values: np.ndarray
    dim_roles: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        matrix = _as_array(self.values, "Sample matrix")
        if matrix.ndim == 1:
            matrix = matrix[:, np.newaxis]
        if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
            raise InputError("Sample matrix must be a non-empty N x D array.")
        if not np.all(np.isfinite(matrix)):
            raise InputError("Sample matrix contains non-finite values.")
        if self.dim_roles is not None:
            roles = tuple(self.dim_roles)
            if len(roles) != matrix.shape[1]:
                raise InputError(
                    f"Expected {matrix.shape[1]} role tags, got {len(roles)}."
                )
            unknown = sorted(set(roles) - {SURROUND, CENTER})
            if unknown:
                raise InputError(f"Unknown role tag(s): {', '.join(unknown)}.")
            object.__setattr__(self, "dim_roles", roles)
        object.__setattr__(self, "values", matrix)

    @property
    def n_samples(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_dims(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class PartitionCell:
    bounds: np.ndarray  # D x 2, columns (lo, hi)
    count: int
    volume: float  # product of extents, zero extents clamped


@dataclass(frozen=True)
class Partition:
    cells: tuple[PartitionCell, ...]
    root_bounds: np.ndarray
    depth: int

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def counts(self) -> np.ndarray:
        return np.array([cell.count for cell in self.cells], dtype=np.int64)

    def validate(self, n_samples: int, tolerance: float = 1e-9) -> None:
        """Check conservation, containment, volume cover and interior disjointness."""
        if int(self.counts.sum()) != n_samples:
            raise SaliencyError(
                f"Cell counts sum to {int(self.counts.sum())}, expected {n_samples}."
            )
        if np.any(self.counts < 1):
            raise SaliencyError("Every cell must hold at least one sample.")
        if any(not cell.volume > 0.0 for cell in self.cells):
            raise SaliencyError("Every cell must have a positive volume.")

        lo = np.array([cell.bounds[:, 0] for cell in self.cells])
        hi = np.array([cell.bounds[:, 1] for cell in self.cells])
        root_lo, root_hi = self.root_bounds[:, 0], self.root_bounds[:, 1]
        if np.any(lo > hi) or np.any(lo < root_lo) or np.any(hi > root_hi):
            raise SaliencyError("A cell lies outside the root box.")

        root_volume = float(np.prod(root_hi - root_lo))
        total = float(np.prod(hi - lo, axis=1).sum())
        if abs(total - root_volume) > tolerance * max(1.0, root_volume):
            raise SaliencyError(f"Cell volumes sum to {total}, root volume is {root_volume}.")

        for i in range(len(self.cells)):
            overlap = np.minimum(hi[i], hi[i + 1 :]) - np.maximum(lo[i], lo[i + 1 :])
            if np.any(np.all(overlap > tolerance, axis=1)):
                raise SaliencyError(f"Cell {i} overlaps another cell.")


@dataclass(frozen=True)
class ImagePlane:
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_grid(self.values, "Image plane"))

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class WaveletPyramid:
    """``details[0]`` is the finest level; each entry is ``(lh, hl, hh)``."""

    approx: np.ndarray
    details: tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]
    shape: tuple[int, int]

    @property
    def levels(self) -> int:
        return len(self.details)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    energy_fraction: float

    @property
    def n_components(self) -> int:
        return int(self.basis.shape[1])

    @property
    def n_dims(self) -> int:
        return int(self.basis.shape[0])


@dataclass(frozen=True)
class FrameStack:
    frames: tuple[ImagePlane, ...]
    period: float = 1.0

    def __post_init__(self) -> None:
        frames = tuple(
            frame if isinstance(frame, ImagePlane) else ImagePlane(frame)
            for frame in self.frames
        )
        if not frames:
            raise InputError("Frame stack needs at least one frame.")
        shape = frames[0].shape
        for index, frame in enumerate(frames):
            if frame.shape != shape:
                raise InputError(
                    f"Frame {index} has shape {frame.shape}, expected {shape}."
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    @property
    def latest(self) -> ImagePlane:
        return self.frames[-1]

    def as_array(self) -> np.ndarray:
        return np.stack([frame.values for frame in self.frames], axis=0)


@dataclass(frozen=True)
class TemporalFeatureStack:
    planes: tuple[ImagePlane, ...]
    basis_index: tuple[int, ...]

    @property
    def n_bases(self) -> int:
        return len(self.planes)

    @property
    def shape(self) -> tuple[int, int]:
        return self.planes[0].shape


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray
    method: str
    kind: str

    def __post_init__(self) -> None:
        grid = _as_grid(self.values, "Saliency map")
        if grid.min() < 0.0 or grid.max() > 1.0:
            raise InputError("Saliency map values must lie in [0, 1].")
        object.__setattr__(self, "values", grid)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class FixationRecord:
    frame_index: int
    x: float
    y: float
    subject_id: str | None = None


@dataclass(frozen=True)
class FixationSet:
    records: tuple[FixationRecord, ...] = ()

    def for_frame(self, frame: int) -> tuple[FixationRecord, ...]:
        return tuple(record for record in self.records if record.frame_index == frame)

    def frames(self) -> list[int]:
        return sorted({record.frame_index for record in self.records})

    def subjects(self) -> list[str | None]:
        return sorted(
            {record.subject_id for record in self.records},
            key=lambda subject: "" if subject is None else subject,
        )

    def by_subject(self) -> list["FixationSet"]:
        return [
            FixationSet(tuple(r for r in self.records if r.subject_id == subject))
            for subject in self.subjects()
        ]


@dataclass(frozen=True)
class ImportanceMap:
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = _as_grid(self.values, "Importance map")
        if grid.min() < 0.0 or grid.max() > 1.0:
            raise InputError("Importance map values must lie in [0, 1].")
        object.__setattr__(self, "values", grid)


@dataclass(frozen=True)
class RocCurve:
    """Points ordered by increasing threshold: starts at (1, 1), ends at (0, 0)."""

    false_positive_rates: np.ndarray
    true_positive_rates: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(
            zip(self.false_positive_rates.tolist(), self.true_positive_rates.tolist())
        )


@dataclass(frozen=True)
class FrameSequenceManifest:
    directory: Path
    names: tuple[str, ...] = field(default_factory=tuple)
    shape: tuple[int, int] = (0, 0)

    @property
    def frame_count(self) -> int:
        return len(self.names)

    @property
    def paths(self) -> list[Path]:
        return [self.directory / name for name in self.names]
