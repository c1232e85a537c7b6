"""Forward-model calibration from paired imagery.

Noise is estimated per band by the robust median-absolute-deviation rule on
the diagonal detail coefficients of a single-level orthonormal Haar
transform.  The kernel width is recovered by a 1-D grid search over the
Gaussian sigma at fixed support size, scoring each candidate by the summed
squared residual between degraded HR images and their LR counterparts.
Temporal pairing matches LR acquisitions to the nearest-in-time HR
acquisition under a maximum-gap constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ValidationError
from .forward import Kernel, forward_plane, gaussian_kernel
from .raster import MultispectralImage
from .wavelet import haar2_forward, trim_to_even

MAD_SCALE = 0.6745


@dataclass(frozen=True)
class PairedSample:
    """An HR image and its LR counterpart, acquired acquisition_gap days apart."""

    hr: MultispectralImage
    lr: MultispectralImage
    acquisition_gap: float = 0.0

    def __post_init__(self):
        if self.acquisition_gap < 0:
            raise ValidationError(f"acquisition gap must be >= 0, got {self.acquisition_gap}")


def estimate_noise_mad(plane: np.ndarray) -> float:
    """Robust noise sigma: median(|diagonal Haar details|) / 0.6745.

    Odd dims are trimmed by one row/column before the transform.
    """
    x = trim_to_even(np.asarray(plane, dtype=np.float64))
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ValidationError(f"plane {plane.shape} too small for noise estimation")
    _, _, _, hh = haar2_forward(x)
    return float(np.median(np.abs(hh)) / MAD_SCALE)


def estimate_noise_image(img: MultispectralImage):
    """Per-band MAD estimates plus their mean (the model-level sigma)."""
    per_band = {name: estimate_noise_mad(img.band(name)) for name in img.band_names}
    return per_band, float(np.mean(list(per_band.values())))


def calibrate_kernel(pairs, size: int, sigma_grid, s: int, boundary: str = "reflective"):
    """Grid search for the Gaussian kernel width explaining the HR->LR pairs.

    Returns (best kernel, table) where table is a list of (sigma, residual)
    over the full grid in ascending sigma order.  The residual for one sigma
    is the sum over pairs and bands of ||forward(hr_band) - lr_band||^2.
    Ties break toward the smaller sigma.
    """
    pairs = list(pairs)
    sigmas = sorted(float(v) for v in sigma_grid)
    if not pairs:
        raise ValidationError("calibrate_kernel needs at least one paired sample")
    if not sigmas:
        raise ValidationError("calibrate_kernel needs a non-empty sigma grid")
    for p in pairs:
        if p.hr.height != p.lr.height * s or p.hr.width != p.lr.width * s:
            raise ValidationError(
                f"pair dims {p.hr.height}x{p.hr.width} vs {p.lr.height}x{p.lr.width} "
                f"inconsistent with s={s}"
            )
        if p.hr.band_names != p.lr.band_names:
            raise ValidationError(f"pair band sets differ: {p.hr.band_names} vs {p.lr.band_names}")

    table = []
    best_sigma = None
    best_residual = np.inf
    for sigma in sigmas:
        kern = gaussian_kernel(size, sigma)
        residual = 0.0
        for p in pairs:
            for b in range(p.hr.band_count):
                pred = forward_plane(p.hr.data[b], kern, s, boundary)
                diff = pred - p.lr.data[b]
                residual += float(np.dot(diff.ravel(), diff.ravel()))
        table.append((sigma, residual))
        if residual < best_residual:
            best_residual = residual
            best_sigma = sigma
    return gaussian_kernel(size, best_sigma), table


def _parse_timestamp(value) -> datetime:
    if isinstance(value, datetime):
        ts = value
    else:
        try:
            ts = datetime.fromisoformat(str(value))
        except ValueError:
            raise ValidationError(f"bad ISO-8601 timestamp: {value!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


@dataclass(frozen=True)
class PairingResult:
    pairs: tuple            # (hr_id, lr_id, gap_days) triples
    unmatched_hr: tuple
    unmatched_lr: tuple


def pair_by_time(hr_manifest, lr_manifest, max_gap: float) -> PairingResult:
    """Greedy nearest-in-time matching of LR entries to HR entries.

    Manifests are (id, timestamp) sequences; timestamps are ISO-8601 strings
    or datetimes.  Candidate pairs within max_gap days are accepted smallest
    gap first (ties: earlier LR, then earlier HR); each id is used at most
    once.  Unmatched ids on both sides are reported.
    """
    hr = [(str(i), _parse_timestamp(t)) for i, t in hr_manifest]
    lr = [(str(i), _parse_timestamp(t)) for i, t in lr_manifest]
    candidates = []
    for lr_id, lr_ts in lr:
        for hr_id, hr_ts in hr:
            gap = abs((hr_ts - lr_ts).total_seconds()) / 86400.0
            if gap <= max_gap:
                candidates.append((gap, lr_ts, hr_ts, lr_id, hr_id))
    candidates.sort(key=lambda c: (c[0], c[1], c[2], c[3], c[4]))
    used_hr, used_lr = set(), set()
    pairs = []
    for gap, _lr_ts, _hr_ts, lr_id, hr_id in candidates:
        if lr_id in used_lr or hr_id in used_hr:
            continue
        used_lr.add(lr_id)
        used_hr.add(hr_id)
        pairs.append((hr_id, lr_id, gap))
    pairs.sort(key=lambda p: (p[0], p[1]))
    return PairingResult(
        pairs=tuple(pairs),
        unmatched_hr=tuple(i for i, _ in hr if i not in used_hr),
        unmatched_lr=tuple(i for i, _ in lr if i not in used_lr),
    )
