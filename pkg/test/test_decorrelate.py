# Test type: Unit (PCA and temporal DCT decorrelation)
# Validation: component selection, orthonormal basis, exact rank recovery, DCT basis retention and error paths
# Command: pytest -q

import numpy as np
import pytest
from scipy import ndimage

from app.core.decorrelate import (
    dct_temporal_decorrelate,
    inverse_temporal_dct,
    pca_fit,
    pca_project,
    pca_reconstruct,
    temporal_dct,
)
from app.core.errors import InputError
from app.models.domain import FrameStack, ImagePlane, SampleMatrix


def _anisotropic(n=4000, seed=0):
    scales = np.sqrt(np.array([10.0, 5.0, 1.0, 0.5, 0.1]))
    return SampleMatrix(np.random.default_rng(seed).standard_normal((n, 5)) * scales + 2.0)


def _stack(frames):
    return FrameStack(tuple(ImagePlane(frame) for frame in frames))


def test_pca_basis_is_orthonormal_and_sorted():
    model = pca_fit(_anisotropic(), target_energy=1.0)
    assert model.n_components == 5
    assert np.allclose(model.basis.T @ model.basis, np.eye(5), atol=1e-10)
    assert np.all(np.diff(model.eigenvalues) <= 0.0)


def test_pca_keeps_the_fewest_components_reaching_the_target():
    samples = _anisotropic()
    model = pca_fit(samples, target_energy=0.9)
    full = pca_fit(samples, target_energy=1.0)
    cumulative = np.cumsum(full.eigenvalues) / full.eigenvalues.sum()
    k = model.n_components

    assert model.energy_fraction >= 0.9
    assert k == 1 or cumulative[k - 2] < 0.9


def test_pca_recovers_rank_deficient_data_exactly():
    rng = np.random.default_rng(1)
    values = rng.standard_normal((500, 2)) @ rng.standard_normal((2, 6)) + 1.5
    samples = SampleMatrix(values)
    model = pca_fit(samples, target_energy=1.0)

    assert model.n_components == 2
    restored = pca_reconstruct(model, pca_project(model, samples))
    assert np.max(np.abs(restored.values - values)) < 1e-8


def test_pca_error_paths():
    with pytest.raises(InputError, match="more samples"):
        pca_fit(SampleMatrix(np.random.default_rng(2).random((5, 5))))
    with pytest.raises(InputError, match="zero variance"):
        pca_fit(SampleMatrix(np.ones((20, 3))))
    with pytest.raises(InputError, match="Target energy"):
        pca_fit(_anisotropic(), target_energy=0.0)

    model = pca_fit(_anisotropic(), target_energy=0.9)
    with pytest.raises(InputError, match="dimensions"):
        pca_project(model, SampleMatrix(np.zeros((10, 4))))


def test_temporal_dct_round_trips():
    frames = np.random.default_rng(3).random((8, 12, 10))
    restored = inverse_temporal_dct(temporal_dct(_stack(frames)))
    assert np.allclose(restored.as_array(), frames, atol=1e-12)


def test_static_stack_puts_all_energy_in_the_first_basis():
    frame = np.random.default_rng(4).random((16, 16))
    coefficients = temporal_dct(_stack([frame] * 8))
    assert np.allclose(coefficients[1:], 0.0, atol=1e-12)
    assert np.allclose(coefficients[0], frame * np.sqrt(8.0))


def test_decorrelation_keeps_ranks_two_through_half():
    rng = np.random.default_rng(5)
    frames = [0.5 + 0.01 * t + 0.001 * rng.standard_normal((16, 16)) for t in range(8)]
    retained = dct_temporal_decorrelate(_stack(frames))

    assert retained.n_bases == 3
    assert 0 not in retained.basis_index
    assert retained.basis_index[0] == 1
    assert retained.shape == (16, 16)


def test_decorrelation_needs_four_frames():
    frames = [np.zeros((8, 8))] * 3
    with pytest.raises(InputError, match="at least 4 frames"):
        dct_temporal_decorrelate(_stack(frames))


def test_temporal_dct_preserves_energy():
    frames = np.random.default_rng(6).standard_normal((8, 10, 12))
    coefficients = temporal_dct(_stack(frames))
    assert abs(np.sum(coefficients**2) - np.sum(frames**2)) <= 1e-12 * np.sum(frames**2)


def _neighborhoods(grid):
    # 3x3 neighborhood of every interior pixel, one column per offset
    height, width = grid.shape
    columns = [
        grid[1 + dy : height - 1 + dy, 1 + dx : width - 1 + dx].ravel()
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
    ]
    return SampleMatrix(np.column_stack(columns))


def test_smooth_image_neighborhoods_compress_to_few_components():
    field = ndimage.gaussian_filter(np.random.default_rng(7).standard_normal((256, 256)), sigma=4.0)
    model = pca_fit(_neighborhoods(field))
    assert model.n_components <= 5
    assert model.energy_fraction >= 0.998


def test_white_noise_neighborhoods_keep_every_component():
    model = pca_fit(_neighborhoods(np.random.default_rng(8).standard_normal((160, 160))))
    assert model.n_components == 9


def test_projection_centers_and_decorrelates_the_training_data():
    samples = _anisotropic(seed=9)
    model = pca_fit(samples, target_energy=1.0)

    assert np.allclose(pca_project(model, SampleMatrix(model.mean[None, :])).values, 0.0, atol=1e-12)
    covariance = np.cov(pca_project(model, samples).values, rowvar=False)
    off_diagonal = covariance - np.diag(np.diag(covariance))
    assert np.max(np.abs(off_diagonal)) <= 1e-6


def test_moving_square_energy_stays_on_its_trail():
    frames = []
    for t in range(8):
        grid = np.zeros((64, 64))
        grid[28:36, 8 + 4 * t : 16 + 4 * t] = 1.0
        frames.append(grid)
    retained = dct_temporal_decorrelate(_stack(frames))

    trail = np.zeros((64, 64), dtype=bool)
    trail[28:36, 8:44] = True
    for plane in retained.planes:
        assert np.all(plane.values[~trail] == 0.0)
    assert sum(float(np.sum(plane.values[trail] ** 2)) for plane in retained.planes) > 0.0
