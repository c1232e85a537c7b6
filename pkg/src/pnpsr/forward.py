"""Degradation operator: Gaussian blur, decimation, exact adjoint, noise.

The forward map A applied to one band is

    y = S_s(C_phi(P(x)))

where P pads by the boundary rule, C_phi is a valid cross-correlation with
the kernel taps and S_s keeps every s-th sample at phase (0, 0).  The
adjoint composes the exact transposes in reverse: zero-insertion upsampling,
full convolution with the taps, then the transpose of the padding (a fold
for reflective padding, a crop for zero padding).

Even-size kernels have no center pixel; the anchor is floor((k-1)/2), which
aligns an output pixel with the top-left of the kernel's central 2x2 block.
Symmetrically sampled kernels make the cross-correlation equal to true
convolution.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FormatError, ValidationError
from .raster import MultispectralImage

BOUNDARY_RULES = ("reflective", "zero")

_KERNEL_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Kernel:
    """Normalized non-negative blur kernel with its width parameter."""

    taps: np.ndarray
    sigma: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1] or taps.shape[0] < 1:
            raise ValidationError(f"kernel taps must be square k x k with k >= 1, got {taps.shape}")
        if np.any(taps < 0):
            raise ValidationError("kernel taps must be non-negative")
        if abs(float(taps.sum()) - 1.0) > _KERNEL_SUM_TOL:
            raise ValidationError(f"kernel taps sum to {taps.sum()!r}, expected 1 within {_KERNEL_SUM_TOL}")
        taps = np.ascontiguousarray(taps)
        taps.flags.writeable = False
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def size(self) -> int:
        return self.taps.shape[0]


@dataclass(frozen=True)
class ForwardModel:
    """Blur kernel, integer decimation factor, noise level and boundary rule."""

    kernel: Kernel
    s: int
    noise_sigma: float = 0.0
    boundary: str = "reflective"

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValidationError(f"decimation factor must be an integer >= 1, got {self.s}")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.boundary not in BOUNDARY_RULES:
            raise ValidationError(f"boundary must be one of {BOUNDARY_RULES}, got {self.boundary!r}")
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))


def gaussian_kernel(size: int, sigma: float) -> Kernel:
    """Sampled isotropic Gaussian, centered at (size-1)/2, normalized to sum 1.

    The exponent is offset by its minimum before exponentiation so very small
    sigmas stay well-defined instead of underflowing to an all-zero grid.
    """
    if size < 1:
        raise ValidationError(f"kernel size must be >= 1, got {size}")
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValidationError(f"kernel sigma must be > 0, got {sigma}")
    c = (size - 1) / 2.0
    idx = np.arange(size, dtype=np.float64) - c
    d2 = idx[:, None] ** 2 + idx[None, :] ** 2
    expo = -(d2 - d2.min()) / (2.0 * sigma * sigma)
    taps = np.exp(expo)
    taps /= taps.sum()
    return Kernel(taps=taps, sigma=float(sigma))


def _check_plane(plane: np.ndarray) -> np.ndarray:
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"expected a 2-D plane, got shape {x.shape}")
    return x


def _pad_widths(k: int):
    a = (k - 1) // 2
    return a, k - 1 - a


def _pad(plane: np.ndarray, k: int, boundary: str) -> np.ndarray:
    lo, hi = _pad_widths(k)
    if lo == 0 and hi == 0:
        return plane
    if boundary == "reflective":
        return np.pad(plane, ((lo, hi), (lo, hi)), mode="symmetric")
    if boundary == "zero":
        return np.pad(plane, ((lo, hi), (lo, hi)), mode="constant")
    raise ValidationError(f"unknown boundary rule {boundary!r}")


def _correlate_valid(padded: np.ndarray, taps: np.ndarray) -> np.ndarray:
    windows = sliding_window_view(padded, taps.shape)
    return np.einsum("ijuv,uv->ij", windows, taps)


def convolve(plane: np.ndarray, k: Kernel, boundary: str = "reflective") -> np.ndarray:
    """Same-size blur of one plane under the given boundary rule."""
    x = _check_plane(plane)
    if boundary not in BOUNDARY_RULES:
        raise ValidationError(f"boundary must be one of {BOUNDARY_RULES}, got {boundary!r}")
    if k.size > min(x.shape):
        raise ValidationError(f"kernel size {k.size} exceeds plane dims {x.shape}")
    return _correlate_valid(_pad(x, k.size, boundary), k.taps)


def downsample(plane: np.ndarray, s: int) -> np.ndarray:
    """Pure decimation at phase (0, 0): output(i, j) = input(s*i, s*j)."""
    x = _check_plane(plane)
    if s < 1:
        raise ValidationError(f"decimation factor must be >= 1, got {s}")
    if x.shape[0] % s or x.shape[1] % s:
        raise ValidationError(f"dims {x.shape} not divisible by s={s}")
    return x[::s, ::s].copy()


def upsample_zero(plane: np.ndarray, s: int) -> np.ndarray:
    """Adjoint of downsample: zero-insertion to the s-times-finer grid."""
    x = _check_plane(plane)
    if s < 1:
        raise ValidationError(f"decimation factor must be >= 1, got {s}")
    out = np.zeros((x.shape[0] * s, x.shape[1] * s))
    out[::s, ::s] = x
    return out


def _convolve_full(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    k = taps.shape[0]
    padded = np.pad(plane, k - 1, mode="constant")
    return _correlate_valid(padded, taps[::-1, ::-1])


def _pad_transpose(full: np.ndarray, hr_shape, k: int, boundary: str) -> np.ndarray:
    h, w = hr_shape
    lo, _hi = _pad_widths(k)
    if boundary == "zero" or k == 1:
        return full[lo:lo + h, lo:lo + w]
    # Reflective fold: route every padded cell back to the source pixel it
    # mirrors, accumulating collisions.
    lo_, hi_ = _pad_widths(k)
    idx = np.arange(h * w).reshape(h, w)
    idx_padded = np.pad(idx, ((lo_, hi_), (lo_, hi_)), mode="symmetric")
    folded = np.bincount(idx_padded.ravel(), weights=full.ravel(), minlength=h * w)
    return folded.reshape(h, w)


def forward_plane(plane: np.ndarray, k: Kernel, s: int, boundary: str) -> np.ndarray:
    """One band through the degradation operator (no noise)."""
    return downsample(convolve(plane, k, boundary), s)


def adjoint_plane(plane: np.ndarray, k: Kernel, s: int, boundary: str) -> np.ndarray:
    """Exact transpose of forward_plane, mapping the LR grid to the HR grid."""
    x = _check_plane(plane)
    up = upsample_zero(x, s)
    full = _convolve_full(up, k.taps)
    return _pad_transpose(full, up.shape, k.size, boundary)


def _check_model_dims(m: ForwardModel, hr_shape) -> None:
    h, w = hr_shape
    if h % m.s or w % m.s:
        raise ValidationError(f"HR dims {h}x{w} not divisible by s={m.s}")
    if m.kernel.size > min(h, w):
        raise ValidationError(f"kernel size {m.kernel.size} exceeds HR dims {h}x{w}")


def forward_bands(arr: np.ndarray, m: ForwardModel) -> np.ndarray:
    """Apply the noiseless forward model to a (bands, H, W) array."""
    _check_model_dims(m, arr.shape[1:])
    return np.stack([forward_plane(b, m.kernel, m.s, m.boundary) for b in arr])


def adjoint_bands(arr: np.ndarray, m: ForwardModel) -> np.ndarray:
    """Apply the adjoint to a (bands, h, w) LR array."""
    hr = (arr.shape[1] * m.s, arr.shape[2] * m.s)
    if m.kernel.size > min(hr):
        raise ValidationError(f"kernel size {m.kernel.size} exceeds HR dims {hr}")
    return np.stack([adjoint_plane(b, m.kernel, m.s, m.boundary) for b in arr])


def apply_forward(x: MultispectralImage, m: ForwardModel) -> MultispectralImage:
    """Blur and decimate every band; pixel size grows by the factor s."""
    return x.with_data(forward_bands(x.data, m), pixel_size=x.pixel_size * m.s)


def apply_adjoint(z: MultispectralImage, m: ForwardModel) -> MultispectralImage:
    """Adjoint of apply_forward; pixel size shrinks by the factor s."""
    return z.with_data(adjoint_bands(z.data, m), pixel_size=z.pixel_size / m.s)


def add_noise(x: MultispectralImage, sigma: float, seed: int) -> MultispectralImage:
    """Add i.i.d. Gaussian noise to every pixel of every band, seeded."""
    if not (np.isfinite(sigma) and sigma >= 0):
        raise ValidationError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return x
    rng = np.random.default_rng(seed)
    return x.with_data(x.data + rng.normal(0.0, sigma, size=x.data.shape))


def operator_norm(m: ForwardModel, hr_dims, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the largest singular value of A.

    The returned Rayleigh estimate is monotone non-decreasing in iters.  A is
    band-separable, so the iteration runs on a single plane.
    """
    if iters < 1:
        raise ValidationError(f"iters must be >= 1, got {iters}")
    h, w = int(hr_dims[0]), int(hr_dims[1])
    _check_model_dims(m, (h, w))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((h, w))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        av = forward_plane(v, m.kernel, m.s, m.boundary)
        est = float(np.linalg.norm(av))
        w_vec = adjoint_plane(av, m.kernel, m.s, m.boundary)
        nw = np.linalg.norm(w_vec)
        if nw == 0.0:
            return 0.0
        v = w_vec / nw
    return est


def save_kernel(k: Kernel, path) -> None:
    """Write the plain-text kernel exchange format: 'k sigma' then k rows of taps."""
    lines = [f"{k.size} {k.sigma!r}"]
    for row in k.taps:
        lines.append(" ".join(repr(float(t)) for t in row))
    with open(os.fspath(path), "w") as f:
        f.write("\n".join(lines) + "\n")


def load_kernel(path) -> Kernel:
    """Read the plain-text kernel exchange format written by save_kernel."""
    with open(os.fspath(path)) as f:
        tokens = f.read().split()
    if len(tokens) < 2:
        raise FormatError(f"{path}: kernel file too short")
    try:
        size = int(tokens[0])
        sigma = float(tokens[1])
        taps = np.array([float(t) for t in tokens[2:]], dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{path}: malformed kernel file: {e}") from None
    if taps.size != size * size:
        raise FormatError(f"{path}: expected {size * size} taps, found {taps.size}")
    return Kernel(taps=taps.reshape(size, size), sigma=sigma)
