from __future__ import annotations

import csv
import logging
import struct
from pathlib import Path

import numpy as np

from app.core.errors import FormatError, InputError, IoError
from app.models.domain import (
    FixationRecord,
    FixationSet,
    FrameSequenceManifest,
    FrameStack,
    ImagePlane,
    ImportanceMap,
    SaliencyMap,
    SampleMatrix,
)

logger = logging.getLogger(__name__)

RAW64_MAGIC = b"SALM"
RAW64_HEADER = struct.Struct("<4sII")
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
DEFAULT_TABLE_PATH = Path(__file__).resolve().parents[1] / "data" / "msrd_importance.csv"
DEFAULT_FRAME_PATTERN = "*.p[gp]m"
TABLE_CLASS_COUNT = 32
_WHITESPACE = b" \t\r\n\v\f"


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"Cannot read {path}: {exc.strerror or exc}") from exc


def _write_bytes(path: str | Path, payload: bytes) -> None:
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise IoError(f"Cannot write {path}: {exc.strerror or exc}") from exc


def _next_token(data: bytes, pos: int) -> tuple[int, int]:
    """Integer token at or after ``pos`` (comments skipped); returns (value, end)."""
    while pos < len(data):
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise FormatError("Expected an integer in the PNM header", f"byte {start}")
    return int(data[start:pos]), pos


def _decode_pnm(data: bytes) -> tuple[np.ndarray, int]:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"Unsupported image magic {magic!r}; expected P5 or P6", "byte 0")
    channels = 1 if magic == b"P5" else 3

    width, pos = _next_token(data, 2)
    height, pos = _next_token(data, pos)
    maxval_at = pos
    maxval, pos = _next_token(data, pos)
    if maxval != 255:
        raise FormatError(f"Only maxval 255 is supported, got {maxval}", f"byte {maxval_at}")
    if width < 1 or height < 1:
        raise FormatError(f"Invalid image size {width}x{height}", "byte 2")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("Missing whitespace after the PNM header", f"byte {pos}")
    start = pos + 1

    needed = width * height * channels
    if len(data) - start < needed:
        raise FormatError(
            f"Truncated payload: {len(data) - start} of {needed} bytes", f"byte {len(data)}"
        )
    samples = np.frombuffer(data, dtype=np.uint8, count=needed, offset=start)
    return samples.reshape(height, width, channels), channels


def _to_unit(samples: np.ndarray, channels: int) -> np.ndarray:
    scaled = samples.astype(np.float64) / 255.0
    if channels == 1:
        return scaled[:, :, 0]
    return scaled @ LUMA_WEIGHTS


def read_image(path: str | Path) -> ImagePlane:
    """8-bit P5/P6 to a [0, 1] plane; color uses Rec.601 luma."""
    samples, channels = _decode_pnm(_read_bytes(path))
    return ImagePlane(_to_unit(samples, channels))


def read_label_map(path: str | Path) -> np.ndarray:
    samples, channels = _decode_pnm(_read_bytes(path))
    if channels != 1:
        raise FormatError("Label maps must be single-channel P5 images", "byte 0")
    return samples[:, :, 0].astype(np.int64)


def _encode_pgm8(values: np.ndarray) -> bytes:
    height, width = values.shape
    payload = np.clip(np.floor(values * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return f"P5\n{width} {height}\n255\n".encode("ascii") + payload.tobytes()


def _encode_raw64(values: np.ndarray) -> bytes:
    height, width = values.shape
    grid = np.ascontiguousarray(values, dtype="<f8")
    return RAW64_HEADER.pack(RAW64_MAGIC, width, height) + grid.tobytes()


def write_raw64(values: np.ndarray, path: str | Path) -> None:
    _write_bytes(path, _encode_raw64(np.asarray(values, dtype=np.float64)))


def read_raw64(path: str | Path) -> np.ndarray:
    return _decode_raw64(_read_bytes(path))


def _decode_raw64(data: bytes) -> np.ndarray:
    if len(data) < RAW64_HEADER.size:
        raise FormatError("Truncated raw64 header", f"byte {len(data)}")
    magic, width, height = RAW64_HEADER.unpack_from(data)
    if magic != RAW64_MAGIC:
        raise FormatError(f"Bad raw64 magic {magic!r}", "byte 0")
    needed = width * height * 8
    available = len(data) - RAW64_HEADER.size
    if available != needed:
        raise FormatError(
            f"raw64 payload holds {available} bytes, expected {needed}", f"byte {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f8", offset=RAW64_HEADER.size)
    return values.reshape(height, width).astype(np.float64)


def write_saliency(saliency: SaliencyMap, path: str | Path, format: str = "pgm8") -> None:
    if format == "pgm8":
        _write_bytes(path, _encode_pgm8(saliency.values))
    elif format == "raw64":
        _write_bytes(path, _encode_raw64(saliency.values))
    else:
        raise InputError(f"Unknown map format '{format}'; use pgm8 or raw64.")


def write_importance(importance: ImportanceMap, path: str | Path) -> None:
    write_raw64(importance.values, path)


def read_map(path: str | Path) -> np.ndarray:
    """A raw64 grid, or an 8-bit PNM scaled to [0, 1]."""
    data = _read_bytes(path)
    if data[:4] == RAW64_MAGIC:
        return _decode_raw64(data)
    samples, channels = _decode_pnm(data)
    return _to_unit(samples, channels)


def _open_csv(path: str | Path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"Cannot read {path}: {exc.strerror or exc}") from exc


def read_fixations(path: str | Path) -> FixationSet:
    """CSV with header ``frame,x,y[,subject]``; coordinates are checked when used."""
    records: list[FixationRecord] = []
    with _open_csv(path) as handle:
        reader = csv.reader(handle)
        header = [cell.strip().lower() for cell in next(reader, [])]
        if header[:3] != ["frame", "x", "y"] or header[3:] not in ([], ["subject"]):
            raise FormatError("Fixation header must be frame,x,y[,subject]", "line 1")
        with_subject = len(header) == 4
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            location = f"line {reader.line_num}"
            if len(row) != len(header):
                raise FormatError(f"Expected {len(header)} fields, got {len(row)}", location)
            try:
                frame = int(row[0])
                x, y = float(row[1]), float(row[2])
            except ValueError as exc:
                raise FormatError(f"Malformed fixation row {row!r}", location) from exc
            if frame < 0 or not (np.isfinite(x) and np.isfinite(y)):
                raise FormatError(f"Invalid fixation values {row!r}", location)
            subject = row[3].strip() if with_subject else None
            records.append(FixationRecord(frame, x, y, subject or None))
    return FixationSet(tuple(records))


def read_importance_table(path: str | Path) -> dict[int, int]:
    """CSV ``class_id,class_name,importance`` to a class id -> importance mapping."""
    table: dict[int, int] = {}
    with _open_csv(path) as handle:
        reader = csv.reader(handle)
        header = [cell.strip().lower() for cell in next(reader, [])]
        if header != ["class_id", "class_name", "importance"]:
            raise FormatError("Table header must be class_id,class_name,importance", "line 1")
        for row in reader:
            if not row:
                continue
            location = f"line {reader.line_num}"
            if len(row) != 3:
                raise FormatError(f"Expected 3 fields, got {len(row)}", location)
            try:
                class_id, importance = int(row[0]), int(row[2])
            except ValueError as exc:
                raise FormatError(f"Malformed table row {row!r}", location) from exc
            if class_id in table:
                raise FormatError(f"Duplicate class_id {class_id}", location)
            if not 1 <= importance <= TABLE_CLASS_COUNT:
                raise FormatError(f"Importance {importance} outside 1..{TABLE_CLASS_COUNT}", location)
            table[class_id] = importance
    return table


def default_importance_table() -> dict[int, int]:
    table = read_importance_table(DEFAULT_TABLE_PATH)
    missing = sorted(set(range(1, TABLE_CLASS_COUNT + 1)) - set(table))
    if missing:
        raise FormatError(f"Default table lacks class ids {missing}", str(DEFAULT_TABLE_PATH))
    return table


def read_sample_csv(path: str | Path) -> SampleMatrix:
    """Numeric rows, one sample per row; a non-numeric first row is a header."""
    rows: list[list[float]] = []
    with _open_csv(path) as handle:
        reader = csv.reader(handle)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                if reader.line_num == 1:
                    continue
                raise FormatError(f"Malformed sample row {row!r}", f"line {reader.line_num}") from exc
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(
                    f"Expected {len(rows[0])} values, got {len(rows[-1])}", f"line {reader.line_num}"
                )
    if not rows:
        raise InputError(f"No samples in {path}.")
    return SampleMatrix(np.array(rows))


def _pnm_shape(path: Path) -> tuple[int, int]:
    samples, _ = _decode_pnm(_read_bytes(path))
    return samples.shape[0], samples.shape[1]


def list_frame_sequence(
    directory: str | Path, pattern: str = DEFAULT_FRAME_PATTERN
) -> FrameSequenceManifest:
    root = Path(directory)
    if not root.is_dir():
        raise IoError(f"Frame directory {root} does not exist.")
    paths = sorted(path for path in root.glob(pattern) if path.is_file())
    if not paths:
        raise InputError(f"no frames in {root} matching {pattern}")

    shape = _pnm_shape(paths[0])
    for path in paths[1:]:
        other = _pnm_shape(path)
        if other != shape:
            raise FormatError(
                f"Frame is {other[1]}x{other[0]}, expected {shape[1]}x{shape[0]}", path.name
            )
    logger.debug("Found %d frames of %dx%d in %s.", len(paths), shape[1], shape[0], root)
    return FrameSequenceManifest(directory=root, names=tuple(p.name for p in paths), shape=shape)


def read_frame_stack(manifest: FrameSequenceManifest, count: int | None = None) -> FrameStack:
    paths = manifest.paths
    if count is not None:
        if count > len(paths):
            raise InputError(f"Need {count} frames, {manifest.directory} has {len(paths)}.")
        paths = paths[len(paths) - count :]
    return FrameStack(tuple(read_image(path) for path in paths))
