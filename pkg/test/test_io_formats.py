# Test type: Unit (file formats)
# Validation: PNM decoding and errors, map writers, fixation and table CSVs, sample CSVs, frame sequences
# Command: pytest -q

import numpy as np
import pytest

from app.core.errors import FormatError, InputError, IoError
from app.core.io_formats import (
    default_importance_table,
    list_frame_sequence,
    read_fixations,
    read_frame_stack,
    read_image,
    read_importance_table,
    read_label_map,
    read_map,
    read_raw64,
    read_sample_csv,
    write_importance,
    write_raw64,
    write_saliency,
)
from app.models.domain import ImportanceMap, SaliencyMap


def _write(path, payload):
    path.write_bytes(payload)
    return path


def _pgm(width, height, samples, header_extra=b""):
    return b"P5\n" + header_extra + f"{width} {height}\n255\n".encode("ascii") + bytes(samples)


def test_reads_gray_and_color_images(tmp_path):
    gray = read_image(_write(tmp_path / "g.pgm", _pgm(2, 2, [0, 255, 0, 255])))
    assert gray.values.tolist() == [[0.0, 1.0], [0.0, 1.0]]

    red = read_image(_write(tmp_path / "r.ppm", b"P6\n1 1\n255\n" + bytes([255, 0, 0])))
    assert red.values[0, 0] == pytest.approx(0.299)
    white = read_image(_write(tmp_path / "w.ppm", b"P6\n1 1\n255\n" + bytes([255, 255, 255])))
    assert white.values[0, 0] == pytest.approx(1.0)


def test_header_comments_are_skipped(tmp_path):
    path = _write(tmp_path / "c.pgm", _pgm(1, 1, [51], header_extra=b"# made by hand\n"))
    assert read_image(path).values[0, 0] == pytest.approx(0.2)


@pytest.mark.parametrize(
    "payload, message",
    [
        (b"P2\n1 1\n255\n0", "magic"),
        (b"P5\n1 1\n65535\n\x00\x00", "maxval"),
        (b"P5\n2 2\n255\n\x00", "Truncated"),
        (b"P5\n1 x\n255\n\x00", "integer"),
    ],
)
def test_malformed_images_raise_format_errors(tmp_path, payload, message):
    path = _write(tmp_path / "bad.pgm", payload)
    with pytest.raises(FormatError, match=message) as excinfo:
        read_image(path)
    assert "byte" in str(excinfo.value)


def test_missing_files_raise_io_errors(tmp_path):
    with pytest.raises(IoError, match="Cannot read"):
        read_image(tmp_path / "absent.pgm")


def test_label_maps_keep_integer_ids(tmp_path):
    labels = read_label_map(_write(tmp_path / "l.pgm", _pgm(2, 1, [1, 32])))
    assert labels.tolist() == [[1, 32]]
    with pytest.raises(FormatError, match="single-channel"):
        read_label_map(_write(tmp_path / "l.ppm", b"P6\n1 1\n255\n" + bytes(3)))


def test_pgm8_writer_rounds_to_nearest_level(tmp_path):
    saliency = SaliencyMap(np.array([[0.0, 0.5, 1.0]]), method="KLD", kind="spatial")
    path = tmp_path / "m.pgm"
    write_saliency(saliency, path, "pgm8")
    assert path.read_bytes() == b"P5\n3 1\n255\n" + bytes([0, 128, 255])


def test_raw64_keeps_full_precision(tmp_path):
    values = np.random.default_rng(0).random((5, 7))
    path = tmp_path / "m.raw"
    write_saliency(SaliencyMap(values, method="CON", kind="spatial"), path, "raw64")
    assert np.array_equal(read_raw64(path), values)
    assert np.array_equal(read_map(path), values)


def test_raw64_rejects_bad_payloads(tmp_path):
    path = tmp_path / "m.raw"
    write_raw64(np.zeros((2, 2)), path)
    _write(path, path.read_bytes()[:-8])
    with pytest.raises(FormatError, match="expected 32"):
        read_raw64(path)
    with pytest.raises(FormatError, match="magic"):
        read_raw64(_write(tmp_path / "x.raw", b"NOPE" + bytes(8)))


def test_unknown_map_format_is_rejected(tmp_path):
    saliency = SaliencyMap(np.zeros((2, 2)), method="KLD", kind="spatial")
    with pytest.raises(InputError, match="Unknown map format"):
        write_saliency(saliency, tmp_path / "m.bin", "png")


def test_importance_maps_are_written_as_raw64(tmp_path):
    path = tmp_path / "importance.raw"
    write_importance(ImportanceMap(np.full((3, 3), 0.5625)), path)
    assert np.array_equal(read_map(path), np.full((3, 3), 0.5625))


def test_reads_fixations_with_and_without_subjects(tmp_path):
    with_subject = tmp_path / "a.csv"
    with_subject.write_text("frame,x,y,subject\n0,1.5,2,A\n\n1,3,4,B\n", encoding="utf-8")
    fixations = read_fixations(with_subject)
    assert len(fixations.records) == 2
    assert fixations.subjects() == ["A", "B"]
    assert fixations.for_frame(1)[0].x == 3.0

    plain = tmp_path / "b.csv"
    plain.write_text("frame,x,y\n0,1,1\n", encoding="utf-8")
    assert read_fixations(plain).records[0].subject_id is None


def test_malformed_fixation_rows_name_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frame,x,y\n0,1,1\n0,one,1\n", encoding="utf-8")
    with pytest.raises(FormatError, match="line 3"):
        read_fixations(path)

    header = tmp_path / "header.csv"
    header.write_text("t,x,y\n0,1,1\n", encoding="utf-8")
    with pytest.raises(FormatError, match="line 1"):
        read_fixations(header)


def test_default_importance_table_covers_every_class():
    table = default_importance_table()
    assert sorted(table) == list(range(1, 33))
    assert table[32] == 32 and table[1] == 1 and table[18] == 18


def test_importance_table_rejects_duplicates_and_out_of_range(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("class_id,class_name,importance\n1,Sky,1\n1,Cloud,2\n", encoding="utf-8")
    with pytest.raises(FormatError, match="Duplicate"):
        read_importance_table(path)

    path.write_text("class_id,class_name,importance\n1,Sky,33\n", encoding="utf-8")
    with pytest.raises(FormatError, match="outside"):
        read_importance_table(path)


def test_sample_csv_skips_a_header(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("a,b\n1,2\n3,4\n", encoding="utf-8")
    samples = read_sample_csv(path)
    assert samples.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    path.write_text("1,2\n3\n", encoding="utf-8")
    with pytest.raises(FormatError, match="line 2"):
        read_sample_csv(path)


def test_frame_sequences_are_sorted_and_checked(tmp_path):
    for index in (2, 0, 1):
        _write(tmp_path / f"f{index}.pgm", _pgm(2, 2, [index * 10] * 4))
    manifest = list_frame_sequence(tmp_path)
    assert manifest.names == ("f0.pgm", "f1.pgm", "f2.pgm")
    assert manifest.frame_count == 3
    assert manifest.shape == (2, 2)

    stack = read_frame_stack(manifest, 2)
    assert len(stack) == 2
    assert stack.latest.values[0, 0] == pytest.approx(20 / 255)
    with pytest.raises(InputError, match="Need 4 frames"):
        read_frame_stack(manifest, 4)


def test_frame_sequences_reject_mixed_sizes_and_empty_directories(tmp_path):
    _write(tmp_path / "a.pgm", _pgm(2, 2, [0] * 4))
    _write(tmp_path / "b.pgm", _pgm(3, 2, [0] * 6))
    with pytest.raises(FormatError, match="b.pgm"):
        list_frame_sequence(tmp_path)

    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(InputError, match="no frames"):
        list_frame_sequence(empty)
    with pytest.raises(IoError, match="does not exist"):
        list_frame_sequence(tmp_path / "missing")
