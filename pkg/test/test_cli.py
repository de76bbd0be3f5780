# Test type: CLI integration (golden outputs and exit codes)
# Validation: metric CSV output against the mini fixture set, map writing, usage and input errors
# Command: pytest -q

from pathlib import Path

import numpy as np

from app import cli
from app.core.io_formats import read_map, read_sample_csv
from app.core.kdp_entropy import estimate_conditional_entropy
from app.models.domain import SampleMatrix, parse_roles

MINI = Path(__file__).parent / "fixtures" / "mini"


def _mini(name):
    return str(MINI / name)


def _golden(name):
    return (MINI / name).read_text(encoding="utf-8")


def _write_pgm(path, values):
    grid = np.clip(np.floor(np.asarray(values) * 255.0 + 0.5), 0, 255).astype(np.uint8)
    height, width = grid.shape
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + grid.tobytes())
    return str(path)


def _textured(seed=0, shape=(64, 64)):
    return np.random.default_rng(seed).random(shape)


def test_eval_roc_matches_golden(capsys):
    code = cli.run(["eval-roc", _mini("fixations.csv"), _mini("map0.pgm"), _mini("map1.pgm"), _mini("map2.pgm")])
    assert code == 0
    assert capsys.readouterr().out == _golden("golden_roc.csv")


def test_eval_nsv_matches_golden(capsys):
    code = cli.run(
        [
            "eval-nsv",
            _mini("fixations.csv"),
            _mini("map0.pgm"),
            _mini("map1.pgm"),
            _mini("map2.pgm"),
            "--nsv-radius",
            "1",
        ]
    )
    assert code == 0
    assert capsys.readouterr().out == _golden("golden_nsv.csv")


def test_eval_cas_on_flat_maps_is_zero(capsys):
    flat = _mini("flat.pgm")
    assert cli.run(["eval-cas", _mini("fixations.csv"), flat, flat, flat]) == 0
    assert capsys.readouterr().out == _golden("golden_cas.csv")


def test_eval_cas_on_mini_maps_matches_golden(capsys):
    # a 16-pixel window covers each 8x8 map, so every NSV is the map maximum
    code = cli.run(["eval-cas", _mini("fixations.csv"), _mini("map0.pgm"), _mini("map1.pgm"), _mini("map2.pgm")])
    assert code == 0
    assert capsys.readouterr().out == _golden("golden_cas.csv")


def test_eval_cas_with_a_small_window_follows_the_indicator(capsys):
    maps = [_mini("map0.pgm"), _mini("map1.pgm"), _mini("map2.pgm")]
    code = cli.run(["eval-cas", _mini("fixations.csv"), *maps, "--nsv-radius", "1", "--random-count", "20000"])
    assert code == 0
    rows = dict(line.split(",") for line in capsys.readouterr().out.splitlines()[1:])

    # 18 of 64 windows touch one of the two fixated pixels
    assert abs(float(rows["0"]) - (1.0 - 18.0 / 64.0)) < 0.02
    assert rows["1"] == "0.000000"
    assert rows["2"] == "0.000000"


def test_eval_isroc_of_agreeing_subjects_is_one(capsys):
    assert cli.run(["eval-isroc", _mini("fixations_agree.csv"), _mini("map0.pgm")]) == 0
    assert capsys.readouterr().out == _golden("golden_isroc.csv")


def test_eval_xcorr_with_label_maps_matches_golden(capsys):
    labels = _mini("labels.pgm")
    code = cli.run(
        [
            "eval-xcorr",
            "--labels",
            _mini("xcorr0.pgm"),
            labels,
            _mini("xcorr1.pgm"),
            labels,
            _mini("xcorr2.pgm"),
            labels,
        ]
    )
    assert code == 0
    assert capsys.readouterr().out == _golden("golden_xcorr.csv")


def test_eval_xcorr_rejects_unpaired_arguments(capsys):
    assert cli.run(["eval-xcorr", _mini("xcorr0.pgm")]) == 1
    assert "pairs" in capsys.readouterr().err


def test_eval_xcorr_of_two_constant_maps_is_an_input_error(capsys):
    flat = _mini("flat.pgm")
    assert cli.run(["eval-xcorr", flat, _mini("map1.pgm")]) == 1
    assert "undefined" in capsys.readouterr().err


def test_entropy_prints_the_estimate(tmp_path, capsys):
    rng = np.random.default_rng(3)
    samples = rng.random((1024, 5))
    path = tmp_path / "samples.csv"
    np.savetxt(path, samples, delimiter=",", header="n,s,w,e,c", comments="")

    assert cli.run(["entropy", str(path), "--roles", "ssssc", "--method", "con"]) == 0
    matrix = read_sample_csv(path)
    expected = estimate_conditional_entropy(SampleMatrix(matrix.values, parse_roles("ssssc")))
    assert capsys.readouterr().out.strip() == cli._fmt(expected)


def test_entropy_reports_inadmissible_sample_counts(tmp_path, capsys):
    path = tmp_path / "tiny.csv"
    np.savetxt(path, np.random.default_rng(4).random((10, 5)), delimiter=",")
    assert cli.run(["entropy", str(path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_spatial_writes_a_pgm_map(tmp_path):
    image = _write_pgm(tmp_path / "scene.pgm", _textured())
    out = tmp_path / "map.pgm"
    assert cli.run(["spatial", image, "--out", str(out), "--method", "con", "--patch-size", "8"]) == 0

    values = read_map(out)
    assert values.shape == (64, 64)
    assert values.min() >= 0.0 and values.max() <= 1.0


def test_spatial_writes_raw64_map(tmp_path):
    image = _write_pgm(tmp_path / "scene.pgm", _textured(seed=1))
    out = tmp_path / "map.raw"
    assert cli.run(["spatial", image, "--out", str(out), "--format", "raw64"]) == 0
    assert read_map(out).shape == (64, 64)


def test_temporal_reads_the_last_frames_of_a_directory(tmp_path):
    frames = tmp_path / "frames"
    frames.mkdir()
    for index in range(10):
        _write_pgm(frames / f"f{index:03d}.pgm", _textured(seed=index))
    out = tmp_path / "temporal.pgm"

    code = cli.run(["temporal", str(frames), "--out", str(out), "--method", "con", "--patch-size", "8"])
    assert code == 0
    assert read_map(out).shape == (64, 64)


def test_temporal_with_empty_directory_fails(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.run(["temporal", str(empty), "--out", str(tmp_path / "x.pgm")]) == 1
    assert "no frames" in capsys.readouterr().err


def test_bias_ratio_of_flat_image_is_zero(capsys):
    assert cli.run(["bias-ratio", _mini("flat.pgm")]) == 0
    assert capsys.readouterr().out == "patch_size,bias_ratio\n7,0.000000\n"


def test_missing_input_file_is_an_input_error(tmp_path, capsys):
    missing = tmp_path / "absent.pgm"
    assert cli.run(["spatial", str(missing), "--out", str(tmp_path / "out.pgm")]) == 1
    assert "Cannot read" in capsys.readouterr().err


def test_out_of_range_patch_size_is_an_input_error(tmp_path, capsys):
    image = _write_pgm(tmp_path / "scene.pgm", _textured())
    assert cli.run(["spatial", image, "--out", str(tmp_path / "o.pgm"), "--patch-size", "5"]) == 1
    assert "error:" in capsys.readouterr().err


def test_usage_errors_exit_with_one(capsys):
    assert cli.run([]) == 1
    assert cli.run(["spatial"]) == 1
    assert cli.run(["spatial", "x.pgm", "--out", "y.pgm", "--method", "foo"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_unexpected_failures_exit_with_two(monkeypatch, tmp_path):
    def explode(path):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "read_image", explode)
    assert cli.run(["spatial", "scene.pgm", "--out", str(tmp_path / "o.pgm")]) == 2
