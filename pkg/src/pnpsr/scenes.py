"""Deterministic synthetic river scenes for experiments and benchmarks.

Each scene is a meandering water channel over textured land, with band
reflectances chosen so NDWI separates water (green above nir) from land
(nir well above green) the way it does on real multispectral imagery.
A scene is a pure function of its seed and geometry.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .raster import SUPPORTED_BANDS, MultispectralImage

# land / water reflectance bases per band, [0, 1] scale
_LAND = {"blue": 0.06, "green": 0.09, "red": 0.11, "nir": 0.35}
_WATER = {"blue": 0.10, "green": 0.12, "red": 0.08, "nir": 0.03}
_TEXTURE_AMP = {"blue": 0.015, "green": 0.02, "red": 0.025, "nir": 0.02}


def _lowpass_texture(rng: np.random.Generator, height: int, width: int, cutoff: float) -> np.ndarray:
    """Zero-mean unit-std smooth field: Gaussian low-pass of white noise."""
    white = rng.normal(0.0, 1.0, size=(height, width))
    fr = np.fft.fftfreq(height)[:, None]
    fc = np.fft.fftfreq(width)[None, :]
    keep = np.exp(-(fr * fr + fc * fc) / (2.0 * cutoff * cutoff))
    tex = np.fft.ifft2(np.fft.fft2(white) * keep).real
    tex -= tex.mean()
    std = tex.std()
    return tex / std if std > 0 else tex


def river_scene(height: int, width: int, seed: int, pixel_size: float = 10.0) -> MultispectralImage:
    """One four-band scene with a meandering river, deterministic in seed."""
    if height < 8 or width < 8:
        raise ValidationError(f"scene dims must be >= 8, got {height}x{width}")
    rng = np.random.default_rng(seed)

    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]

    # channel centerline: two superposed meanders across the full height
    amp1 = rng.uniform(0.08, 0.22) * width
    amp2 = rng.uniform(0.02, 0.07) * width
    f1 = rng.uniform(0.8, 1.8)
    f2 = rng.uniform(2.5, 5.0)
    p1, p2, p3 = rng.uniform(0.0, 2.0 * np.pi, size=3)
    center = width / 2.0 + amp1 * np.sin(2.0 * np.pi * f1 * rows / height + p1) \
        + amp2 * np.sin(2.0 * np.pi * f2 * rows / height + p2)

    base_width = rng.uniform(2.0, 3.2)
    chan_width = base_width * (1.0 + 0.25 * np.sin(2.0 * np.pi * rng.uniform(1.0, 3.0) * rows / height + p3))

    # water fraction: soft edge roughly one pixel wide
    signed = np.abs(cols - center) - chan_width / 2.0
    alpha = 1.0 / (1.0 + np.exp(signed / 0.6))

    tex_land = _lowpass_texture(rng, height, width, cutoff=0.06)
    tex_water = _lowpass_texture(rng, height, width, cutoff=0.10)

    planes = []
    for name in SUPPORTED_BANDS:
        land = _LAND[name] + _TEXTURE_AMP[name] * tex_land
        water = _WATER[name] + 0.5 * _TEXTURE_AMP[name] * tex_water
        planes.append(alpha * water + (1.0 - alpha) * land)
    data = np.clip(np.stack(planes), 0.0, 1.0)
    return MultispectralImage(data=data, band_names=SUPPORTED_BANDS, pixel_size=pixel_size)
