"""Pluggable denoisers sharing one strength-scalar contract.

Each kind maps the scalar strength to its own parameter: the wavelet kind
soft-thresholds detail coefficients by the strength, the TV kind solves
prox_{strength * TV}, and external models receive the strength as a constant
noise-map channel appended to the band stack.  Strength zero is the exact
identity for every classical kind, which the plug-and-play solver relies on.

Classical kinds act band-independently; external models see all bands
jointly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .neural import NetworkModel, load_network
from .raster import MultispectralImage
from .wavelet import haar2_decompose, haar2_reconstruct, pad_to_multiple

CLASSICAL_KINDS = ("identity", "wavelet_soft", "tv_prox")
DENOISER_KINDS = CLASSICAL_KINDS + ("external",)

WAVELET_LEVELS = 2
TV_PROX_ITERS = 60

_STRENGTH_SEMANTICS = {
    "identity": "strength is ignored; output equals input",
    "wavelet_soft": "strength is the soft-threshold applied to Haar detail coefficients",
    "tv_prox": "strength is the total-variation weight of the proximal objective",
    "external": "strength fills the constant noise-map channel fed to the network",
}


@dataclass(frozen=True)
class DenoiserSpec:
    """A denoiser kind plus whatever resources it needs at call time."""

    kind: str
    strength_semantics: str = ""
    resource: str | None = None
    model: NetworkModel | None = None

    def __post_init__(self):
        if self.kind not in DENOISER_KINDS:
            raise ValidationError(f"unknown denoiser kind {self.kind!r}; choose from {DENOISER_KINDS}")
        if self.kind == "external" and self.model is None:
            raise ValidationError("external denoiser requires a loaded model; use load_external(path)")
        if not self.strength_semantics:
            object.__setattr__(self, "strength_semantics", _STRENGTH_SEMANTICS[self.kind])


def make_denoiser(kind: str, resource=None) -> DenoiserSpec:
    """Build a DenoiserSpec; external kinds load their weights file."""
    if kind == "external":
        if resource is None:
            raise ValidationError("external denoiser needs a weights file path")
        return load_external(resource)
    return DenoiserSpec(kind=kind)


def load_external(path) -> DenoiserSpec:
    """Load a portable weights file into a ready-to-call denoiser spec."""
    model = load_network(path)
    return DenoiserSpec(kind="external", resource=str(path), model=model)


def soft_threshold(values: np.ndarray, t: float) -> np.ndarray:
    """Soft shrinkage: sign(v) * max(|v| - t, 0)."""
    return np.sign(values) * np.maximum(np.abs(values) - t, 0.0)


def wavelet_soft_plane(plane: np.ndarray, t: float, levels: int = WAVELET_LEVELS) -> np.ndarray:
    """Haar-domain soft thresholding of detail coefficients, one plane.

    Dims that are not multiples of 2**levels are edge-padded for the
    transform and cropped back afterwards.
    """
    if t < 0:
        raise ValidationError(f"threshold must be >= 0, got {t}")
    padded, orig = pad_to_multiple(np.asarray(plane, dtype=np.float64), 2 ** levels)
    ll, details = haar2_decompose(padded, levels)
    shrunk = [tuple(soft_threshold(d, t) for d in triple) for triple in details]
    out = haar2_reconstruct(ll, shrunk)
    return out[: orig[0], : orig[1]]


def wavelet_detail_l1(plane: np.ndarray, levels: int = WAVELET_LEVELS) -> float:
    """l1 norm of the Haar detail coefficients thresholded by wavelet_soft_plane."""
    padded, _ = pad_to_multiple(np.asarray(plane, dtype=np.float64), 2 ** levels)
    _, details = haar2_decompose(padded, levels)
    return float(sum(np.abs(d).sum() for triple in details for d in triple))


def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1, :] = u[1:, :] - u[:-1, :]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return gx, gy


def _div(px, py):
    d = np.zeros_like(px)
    d[0, :] += px[0, :]
    d[1:-1, :] += px[1:-1, :] - px[:-2, :]
    d[-1, :] -= px[-2, :]
    d[:, 0] += py[:, 0]
    d[:, 1:-1] += py[:, 1:-1] - py[:, :-2]
    d[:, -1] -= py[:, -2]
    return d


def tv_value(plane: np.ndarray) -> float:
    """Isotropic total variation with forward differences."""
    gx, gy = _grad(np.asarray(plane, dtype=np.float64))
    return float(np.sqrt(gx * gx + gy * gy).sum())


def tv_prox_plane(plane: np.ndarray, lam: float, iters: int = TV_PROX_ITERS) -> np.ndarray:
    """prox of lam * TV via projected gradient on the dual, fixed budget.

    Dual step 1/8 (the classical bound for the discrete divergence); no
    inner stopping rule, so the cost is deterministic.
    """
    if lam < 0:
        raise ValidationError(f"TV weight must be >= 0, got {lam}")
    if iters < 1:
        raise ValidationError(f"iters must be >= 1, got {iters}")
    x = np.asarray(plane, dtype=np.float64)
    if lam == 0:
        return x.copy()
    v = x / lam
    px = np.zeros_like(x)
    py = np.zeros_like(x)
    for _ in range(iters):
        gx, gy = _grad(_div(px, py) - v)
        px = px + 0.125 * gx
        py = py + 0.125 * gy
        scale = np.maximum(1.0, np.sqrt(px * px + py * py))
        px /= scale
        py /= scale
    return x - lam * _div(px, py)


def denoise_bands(spec: DenoiserSpec, arr: np.ndarray, strength: float) -> np.ndarray:
    """Denoiser contract on a raw (bands, H, W) array; same shape out."""
    if strength < 0:
        raise ValidationError(f"denoiser strength must be >= 0, got {strength}")
    if spec.kind in CLASSICAL_KINDS:
        if spec.kind == "identity" or strength == 0:
            return np.asarray(arr, dtype=np.float64).copy()
        if spec.kind == "wavelet_soft":
            return np.stack([wavelet_soft_plane(b, strength) for b in arr])
        return np.stack([tv_prox_plane(b, strength, TV_PROX_ITERS) for b in arr])
    model = spec.model
    if arr.shape[0] != model.bands:
        raise ValidationError(f"model expects {model.bands} bands, image has {arr.shape[0]}")
    noise_map = np.full((1, arr.shape[1], arr.shape[2]), strength, dtype=np.float32)
    stacked = np.concatenate([np.asarray(arr, dtype=np.float32), noise_map], axis=0)
    return model.run(stacked).astype(np.float64)


def denoise(spec: DenoiserSpec, x: MultispectralImage, strength: float) -> MultispectralImage:
    """Apply the denoiser at the given strength; dims and bands are preserved."""
    return x.with_data(denoise_bands(spec, x.data, strength))


def wavelet_soft_threshold(x: MultispectralImage, t: float) -> MultispectralImage:
    """Per-band Haar soft thresholding of an image."""
    if t < 0:
        raise ValidationError(f"threshold must be >= 0, got {t}")
    return x.with_data(np.stack([wavelet_soft_plane(b, t) for b in x.data]))


def tv_prox(x: MultispectralImage, lam: float, iters: int = TV_PROX_ITERS) -> MultispectralImage:
    """Per-band approximate prox of lam * TV."""
    return x.with_data(np.stack([tv_prox_plane(b, lam, iters) for b in x.data]))
