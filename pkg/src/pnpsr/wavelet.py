"""Orthonormal single- and multi-level 2-D Haar transforms.

The transform is orthonormal (analysis filters (1,1)/sqrt(2) and
(1,-1)/sqrt(2)), so a forward/inverse round trip is exact up to float
rounding and Parseval holds.  Inputs must have even dims at every
decomposed level; callers trim or pad beforehand.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_SQRT2 = np.sqrt(2.0)


def haar2_forward(plane: np.ndarray):
    """One analysis level: returns (ll, lh, hl, hh) quarter-size subbands.

    lh carries column-direction detail, hl row-direction detail, hh diagonal
    detail.
    """
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"expected 2-D plane, got shape {x.shape}")
    h, w = x.shape
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise ValidationError(f"Haar level needs even dims >= 2x2, got {h}x{w}")
    lo_r = (x[0::2, :] + x[1::2, :]) / _SQRT2
    hi_r = (x[0::2, :] - x[1::2, :]) / _SQRT2
    ll = (lo_r[:, 0::2] + lo_r[:, 1::2]) / _SQRT2
    lh = (lo_r[:, 0::2] - lo_r[:, 1::2]) / _SQRT2
    hl = (hi_r[:, 0::2] + hi_r[:, 1::2]) / _SQRT2
    hh = (hi_r[:, 0::2] - hi_r[:, 1::2]) / _SQRT2
    return ll, lh, hl, hh


def haar2_inverse(ll, lh, hl, hh) -> np.ndarray:
    """Exact inverse of haar2_forward."""
    ll, lh, hl, hh = (np.asarray(a, dtype=np.float64) for a in (ll, lh, hl, hh))
    m, n = ll.shape
    lo_r = np.empty((m, 2 * n))
    lo_r[:, 0::2] = (ll + lh) / _SQRT2
    lo_r[:, 1::2] = (ll - lh) / _SQRT2
    hi_r = np.empty((m, 2 * n))
    hi_r[:, 0::2] = (hl + hh) / _SQRT2
    hi_r[:, 1::2] = (hl - hh) / _SQRT2
    x = np.empty((2 * m, 2 * n))
    x[0::2, :] = (lo_r + hi_r) / _SQRT2
    x[1::2, :] = (lo_r - hi_r) / _SQRT2
    return x


def haar2_decompose(plane: np.ndarray, levels: int):
    """Multi-level decomposition: (ll, [details_fine, ..., details_coarse]).

    Each details entry is the (lh, hl, hh) triple of one level, finest first.
    Dims must be divisible by 2**levels.
    """
    if levels < 1:
        raise ValidationError(f"levels must be >= 1, got {levels}")
    x = np.asarray(plane, dtype=np.float64)
    details = []
    for _ in range(levels):
        x, lh, hl, hh = haar2_forward(x)
        details.append((lh, hl, hh))
    return x, details


def haar2_reconstruct(ll: np.ndarray, details) -> np.ndarray:
    """Inverse of haar2_decompose."""
    x = np.asarray(ll, dtype=np.float64)
    for lh, hl, hh in reversed(details):
        x = haar2_inverse(x, lh, hl, hh)
    return x


def trim_to_even(plane: np.ndarray) -> np.ndarray:
    """Drop the last row/column when the corresponding dim is odd."""
    x = np.asarray(plane)
    h = x.shape[0] - x.shape[0] % 2
    w = x.shape[1] - x.shape[1] % 2
    return x[:h, :w]


def pad_to_multiple(plane: np.ndarray, multiple: int):
    """Edge-pad on the bottom/right up to the next multiple; returns
    (padded, original_shape) so the caller can crop back."""
    x = np.asarray(plane)
    h, w = x.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return x, (h, w)
    return np.pad(x, ((0, ph), (0, pw)), mode="edge"), (h, w)
