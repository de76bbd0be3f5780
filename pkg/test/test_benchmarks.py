# Test type: Performance (CON vs KLD timing, estimator scaling)
# Validation: KLD patch scoring at most 0.75x CON time, log-log runtime slope <= 1.2, deterministic bench scene
# Command: pytest -q

import numpy as np

from app.core import bench


def test_textured_scene_is_deterministic_and_in_range():
    first = bench.textured_scene((64, 80), seed=3)
    second = bench.textured_scene((64, 80), seed=3)
    assert first.shape == (64, 80)
    assert np.array_equal(first.values, second.values)
    assert 0.0 <= first.values.min() <= first.values.max() <= 1.0


def test_kld_scoring_is_faster_than_con():
    scene = bench.textured_scene((256, 320), seed=0)
    medians = bench.method_timings(scene, repeats=5)
    assert medians["kld"] <= 0.75 * medians["con"]


def test_entropy_runtime_scales_near_linearly():
    rows = bench.entropy_scaling(range(12, 21), dims=5, repeats=3)
    assert [n for n, _ in rows] == [2**e for e in range(12, 21)]
    assert bench.loglog_slope(rows) <= 1.2


def test_loglog_slope_of_exact_power_law():
    rows = [(n, 1e-6 * n**1.5) for n in (2**10, 2**12, 2**14)]
    assert abs(bench.loglog_slope(rows) - 1.5) < 1e-9


def test_time_call_runs_at_least_once():
    calls = []
    timings = bench.time_call(lambda: calls.append(1), repeats=0)
    assert len(timings) == 1 and calls == [1]
    assert bench.resident_memory_mb() > 0.0
