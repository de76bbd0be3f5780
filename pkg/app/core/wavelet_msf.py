from __future__ import annotations

import logging
import math

import numpy as np
from scipy import ndimage, stats

from app.core.errors import InputError
from app.models.domain import ImagePlane, WaveletPyramid

logger = logging.getLogger(__name__)

# CDF 9/7 lifting coefficients.
ALPHA = -1.586134342059924
BETA = -0.052980118572961
GAMMA = 0.882911075530934
DELTA = 0.443506852043971
KAPPA = 1.230174104914001

WAVELET_LEVELS = 3
SHRINK_WINDOW = 7
NOISE_MAD_SCALE = float(stats.norm.ppf(0.75))  # 0.6745


def _shift_next(values: np.ndarray, count: int) -> np.ndarray:
    """values[i + 1] for i < count, mirrored about the last sample."""
    head = values[1 : count + 1]
    if head.shape[0] < count:
        head = np.concatenate((head, values[-1:]), axis=0)
    return head


def _shift_prev(values: np.ndarray, count: int) -> np.ndarray:
    return np.concatenate((values[:1], values[: count - 1]), axis=0)


def _take(values: np.ndarray, count: int) -> np.ndarray:
    head = values[:count]
    if head.shape[0] < count:
        head = np.concatenate((head, values[-1:]), axis=0)
    return head


def _analyze(signal: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.moveaxis(signal, axis, 0)
    even = x[0::2].copy()
    odd = x[1::2].copy()
    k, m = even.shape[0], odd.shape[0]

    odd += ALPHA * (even[:m] + _shift_next(even, m))
    even += BETA * (_shift_prev(odd, k) + _take(odd, k))
    odd += GAMMA * (even[:m] + _shift_next(even, m))
    even += DELTA * (_shift_prev(odd, k) + _take(odd, k))

    return np.moveaxis(even / KAPPA, 0, axis), np.moveaxis(odd * KAPPA, 0, axis)


def _synthesize(low: np.ndarray, high: np.ndarray, axis: int) -> np.ndarray:
    even = np.moveaxis(low, axis, 0) * KAPPA
    odd = np.moveaxis(high, axis, 0) / KAPPA
    k, m = even.shape[0], odd.shape[0]

    even -= DELTA * (_shift_prev(odd, k) + _take(odd, k))
    odd -= GAMMA * (even[:m] + _shift_next(even, m))
    even -= BETA * (_shift_prev(odd, k) + _take(odd, k))
    odd -= ALPHA * (even[:m] + _shift_next(even, m))

    out = np.empty((k + m,) + even.shape[1:], dtype=np.float64)
    out[0::2] = even
    out[1::2] = odd
    return np.moveaxis(out, 0, axis)


def _level_shapes(shape: tuple[int, int], levels: int) -> list[tuple[int, int]]:
    shapes = [shape]
    for _ in range(levels):
        h, w = shapes[-1]
        shapes.append((math.ceil(h / 2), math.ceil(w / 2)))
    return shapes


def cdf97_forward(plane: ImagePlane, levels: int = WAVELET_LEVELS) -> WaveletPyramid:
    if levels < 1:
        raise InputError("Wavelet levels must be >= 1.")
    if min(plane.shape) < 2**levels:
        raise InputError(
            f"Plane {plane.height}x{plane.width} is too small for {levels} wavelet levels."
        )

    approx = plane.values
    details = []
    for _ in range(levels):
        low, high = _analyze(approx, axis=1)
        ll, lh = _analyze(low, axis=0)
        hl, hh = _analyze(high, axis=0)
        details.append((lh, hl, hh))
        approx = ll
    return WaveletPyramid(approx=approx, details=tuple(details), shape=plane.shape)


def _check_pyramid(pyramid: WaveletPyramid) -> None:
    if pyramid.levels < 1:
        raise InputError("Pyramid has no detail levels.")
    shapes = _level_shapes(pyramid.shape, pyramid.levels)
    if pyramid.approx.shape != shapes[-1]:
        raise InputError(
            f"Approximation band is {pyramid.approx.shape}, expected {shapes[-1]}."
        )
    for index, (lh, hl, hh) in enumerate(pyramid.details):
        h, w = shapes[index]
        expected = ((h // 2, math.ceil(w / 2)), (math.ceil(h / 2), w // 2), (h // 2, w // 2))
        for name, band, want in zip(("LH", "HL", "HH"), (lh, hl, hh), expected):
            if band.shape != want:
                raise InputError(
                    f"{name} band at level {index + 1} is {band.shape}, expected {want}."
                )


def cdf97_inverse(pyramid: WaveletPyramid) -> ImagePlane:
    _check_pyramid(pyramid)
    approx = np.asarray(pyramid.approx, dtype=np.float64)
    for lh, hl, hh in reversed(pyramid.details):
        low = _synthesize(approx, lh, axis=0)
        high = _synthesize(hl, hh, axis=0)
        approx = _synthesize(low, high, axis=1)
    return ImagePlane(approx)


def estimate_noise_sigma(pyramid: WaveletPyramid) -> float:
    """Robust noise level from the finest diagonal band: median(|HH1|) / 0.6745."""
    hh = pyramid.details[0][2]
    return float(np.median(np.abs(hh)) / NOISE_MAD_SCALE)


def _parent_on_child_grid(parent: np.ndarray, child_shape: tuple[int, int]) -> np.ndarray:
    rows = np.minimum(np.arange(child_shape[0]) // 2, parent.shape[0] - 1)
    cols = np.minimum(np.arange(child_shape[1]) // 2, parent.shape[1] - 1)
    return parent[np.ix_(rows, cols)]


def _shrink_band(
    child: np.ndarray, parent: np.ndarray, noise_sigma: float, window: int
) -> np.ndarray:
    if noise_sigma <= 0.0:
        return child.copy()
    noise_var = noise_sigma**2
    local_power = ndimage.uniform_filter(child * child, size=window, mode="reflect")
    signal_sigma = np.sqrt(np.maximum(local_power - noise_var, 0.0))
    with np.errstate(divide="ignore"):
        threshold = np.where(
            signal_sigma > 0.0, math.sqrt(3.0) * noise_var / signal_sigma, np.inf
        )
    magnitude = np.hypot(child, parent)
    gain = np.zeros_like(child)
    nonzero = magnitude > 0.0
    gain[nonzero] = np.maximum(magnitude[nonzero] - threshold[nonzero], 0.0) / magnitude[nonzero]
    return child * gain


def bivariate_shrink(
    pyramid: WaveletPyramid,
    noise_sigma: float | None = None,
    window: int = SHRINK_WINDOW,
) -> WaveletPyramid:
    """Parent-child shrinkage of detail levels 2..J; level 1 and LL pass through."""
    if pyramid.levels < 2:
        raise InputError("Bivariate shrinkage needs at least two wavelet levels.")
    sigma_n = estimate_noise_sigma(pyramid) if noise_sigma is None else float(noise_sigma)
    if sigma_n < 0.0:
        raise InputError("Noise sigma must be non-negative.")

    details = [pyramid.details[0]]
    for index in range(1, pyramid.levels):
        bands = []
        for orientation, child in enumerate(pyramid.details[index]):
            if index + 1 < pyramid.levels:
                parent = pyramid.details[index + 1][orientation]
                parent = _parent_on_child_grid(parent, child.shape)
            else:
                parent = np.zeros_like(child)
            bands.append(_shrink_band(child, parent, sigma_n, window))
        details.append(tuple(bands))
    logger.debug("Bivariate shrinkage with noise sigma %.6g over %d levels.", sigma_n, pyramid.levels - 1)
    return WaveletPyramid(approx=pyramid.approx, details=tuple(details), shape=pyramid.shape)


def _drop_dc_and_finest(pyramid: WaveletPyramid) -> WaveletPyramid:
    finest = tuple(np.zeros_like(band) for band in pyramid.details[0])
    return WaveletPyramid(
        approx=np.zeros_like(pyramid.approx),
        details=(finest,) + pyramid.details[1:],
        shape=pyramid.shape,
    )


def _zero_mean(plane: ImagePlane) -> ImagePlane:
    return ImagePlane(plane.values - plane.values.mean())


def msf_filter(plane: ImagePlane) -> ImagePlane:
    """Medium subband filter: drop LL3 and the level-1 details."""
    pyramid = _drop_dc_and_finest(cdf97_forward(plane, WAVELET_LEVELS))
    return _zero_mean(cdf97_inverse(pyramid))


def msf_denoised(plane: ImagePlane, noise_sigma: float | None = None) -> ImagePlane:
    pyramid = cdf97_forward(plane, WAVELET_LEVELS)
    if noise_sigma is None:
        noise_sigma = estimate_noise_sigma(pyramid)
    pyramid = bivariate_shrink(_drop_dc_and_finest(pyramid), noise_sigma=noise_sigma)
    return _zero_mean(cdf97_inverse(pyramid))
