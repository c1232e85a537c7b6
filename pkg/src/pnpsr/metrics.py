"""Evaluation suite: NDWI water extraction, PSNR, SSIM, resampling baselines.

Conventions that affect comparability, all documented here because every
reported number depends on them: reflectance range [0, 1] (PSNR peak 1.0),
PSNR from a single MSE over all bands jointly, NDWI zero-denominator pixels
mapped to 0, water threshold strictly greater-than with default 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError
from .raster import MultispectralImage

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
KEYS_A = -0.75


def ndwi(x: MultispectralImage) -> np.ndarray:
    """Normalized difference water index, (green - nir) / (green + nir).

    Pixels where the denominator is zero map to 0 (threshold-neutral for
    the default water threshold).  Output is clipped to [-1, 1] to absorb
    rounding on near-degenerate denominators.
    """
    green = x.band("green")
    nir = x.band("nir")
    num = green - nir
    den = green + nir
    out = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return np.clip(out, -1.0, 1.0)


@dataclass(frozen=True)
class WaterMask:
    """Boolean water raster with the threshold and ground sampling that made it."""

    mask: np.ndarray
    threshold_used: float
    pixel_size: float

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2:
            raise ValidationError(f"mask must be 2-D, got shape {mask.shape}")
        if not np.isfinite(self.threshold_used):
            raise ValidationError("threshold must be finite")
        if not (np.isfinite(self.pixel_size) and self.pixel_size > 0):
            raise ValidationError(f"pixel_size must be positive, got {self.pixel_size}")


def threshold_water(ndwi_plane: np.ndarray, thr: float = 0.0, *, pixel_size: float) -> WaterMask:
    """Water mask from an NDWI plane: strictly ndwi > thr."""
    plane = np.asarray(ndwi_plane, dtype=np.float64)
    return WaterMask(mask=plane > thr, threshold_used=float(thr), pixel_size=float(pixel_size))


def water_area(mask: WaterMask) -> float:
    """Open-water surface in square meters: count(true) * pixel_size^2."""
    return float(np.count_nonzero(mask.mask)) * mask.pixel_size ** 2


def save_mask_png(mask: WaterMask, path) -> None:
    """Export a water mask as an 8-bit PNG, water 255 and land 0."""
    from PIL import Image

    Image.fromarray(mask.mask.astype(np.uint8) * 255, mode="L").save(os.fspath(path))


def _check_comparable(x: MultispectralImage, ref: MultispectralImage):
    if x.data.shape != ref.data.shape:
        raise ValidationError(f"image dims {x.data.shape} do not match reference {ref.data.shape}")
    if x.band_names != ref.band_names:
        raise ValidationError(f"band sets differ: {x.band_names} vs {ref.band_names}")


def psnr(x: MultispectralImage, ref: MultispectralImage, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over all bands jointly.

    Identical images would be +inf; those (and anything above it) report
    the sentinel cap of 99 dB.
    """
    _check_comparable(x, ref)
    mse = float(np.mean((x.data - ref.data) ** 2))
    if mse == 0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    t = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(plane: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable windowed mean, valid extent only
    rows = sliding_window_view(plane, len(g), axis=0) @ g
    return sliding_window_view(rows, len(g), axis=1) @ g


def _ssim_plane(a: np.ndarray, b: np.ndarray, g: np.ndarray, c1: float, c2: float) -> np.ndarray:
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(x: MultispectralImage, ref: MultispectralImage, peak: float = 1.0) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows and bands."""
    _check_comparable(x, ref)
    if x.height < SSIM_WINDOW or x.width < SSIM_WINDOW:
        raise ValidationError(
            f"image {x.height}x{x.width} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    g = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    maps = [_ssim_plane(a, b, g, c1, c2) for a, b in zip(x.data, ref.data)]
    return float(np.mean(maps))


def _keys_weight(t: float) -> float:
    at = abs(t)
    if at <= 1.0:
        return (KEYS_A + 2.0) * at ** 3 - (KEYS_A + 3.0) * at ** 2 + 1.0
    if at < 2.0:
        return KEYS_A * (at ** 3 - 5.0 * at ** 2 + 8.0 * at - 4.0)
    return 0.0


def _reflect_index(idx: int, n: int) -> int:
    if n == 1:
        return 0
    idx %= 2 * n
    return idx if idx < n else 2 * n - 1 - idx


@lru_cache(maxsize=64)
def _upsample_matrix(n: int, s: int) -> np.ndarray:
    """Dense 1-D Keys interpolation operator (n*s, n), half-pixel centers."""
    m = np.zeros((n * s, n))
    for i in range(n * s):
        pos = (i + 0.5) / s - 0.5
        base = int(np.floor(pos))
        taps = np.array([_keys_weight(pos - j) for j in range(base - 1, base + 3)])
        taps /= taps.sum()
        for j, w in zip(range(base - 1, base + 3), taps):
            m[i, _reflect_index(j, n)] += w
    m.setflags(write=False)
    return m


def bicubic_upsample(z: MultispectralImage, s: int) -> MultispectralImage:
    """Keys cubic upsampling by an integer factor, reflective edges.

    Separable: the cached 1-D operator is applied to rows then columns, so
    repeated calls at one geometry cost two matmuls per band.
    """
    if s < 1 or s != int(s):
        raise ValidationError(f"upsampling factor must be a positive integer, got {s}")
    s = int(s)
    if s == 1:
        return z.with_data(z.data)
    ur = _upsample_matrix(z.height, s)
    uc = _upsample_matrix(z.width, s)
    out = np.stack([ur @ plane @ uc.T for plane in z.data])
    return z.with_data(out, pixel_size=z.pixel_size / s)


def nearest_upsample(z: MultispectralImage, s: int) -> MultispectralImage:
    """Nearest-neighbor upsampling, the comparator for low-res area metrics."""
    if s < 1 or s != int(s):
        raise ValidationError(f"upsampling factor must be a positive integer, got {s}")
    s = int(s)
    out = np.repeat(np.repeat(z.data, s, axis=1), s, axis=2)
    return z.with_data(out, pixel_size=z.pixel_size / s)
