"""Noisy/clean training pairs built from a directory of clean MSR crops.

The corpus is loaded once; noise is regenerated every epoch from a seed
derived as (seed, epoch), so a run is reproducible end to end while no two
epochs see the same noise realization.  The noise-map plane fed to the
network carries the sample's sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import REQUIRED_BANDS
from .errors import ValidationError
from .msr import load_corpus


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """Deterministic per-epoch generator; distinct epochs, distinct streams."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch]))


@dataclass(frozen=True)
class TrainingSet:
    """Clean crops stacked (count, bands, size, size) plus the noise recipe."""

    clean: np.ndarray
    noise_sigma: float
    seed: int

    @property
    def count(self) -> int:
        return self.clean.shape[0]

    @property
    def crop_size(self) -> int:
        return self.clean.shape[2]

    def epoch_pairs(self, epoch: int):
        """(noisy, clean) float32 stacks for one epoch, corpus order."""
        rng = epoch_rng(self.seed, epoch)
        noise = rng.standard_normal(self.clean.shape, dtype=np.float32)
        return self.clean + np.float32(self.noise_sigma) * noise, self.clean


def build_pairs(clean_dir, noise_sigma: float, seed: int) -> TrainingSet:
    """Load a clean-crop corpus and bind it to a noise level and seed.

    Crops must share one square, 8-divisible geometry so they batch into a
    single stack; an empty directory is an error.
    """
    if not (np.isfinite(noise_sigma) and noise_sigma >= 0):
        raise ValidationError(f"noise_sigma must be finite and >= 0, got {noise_sigma}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")
    crops = load_corpus(clean_dir, REQUIRED_BANDS)
    size = crops[0].height
    for crop in crops:
        if crop.height != size or crop.width != size:
            raise ValidationError(
                f"corpus crops must share one square size; saw {size}x{size} "
                f"and {crop.height}x{crop.width}"
            )
    if size % 8:
        raise ValidationError(f"crop size {size} not divisible by 8")
    clean = np.stack([crop.data for crop in crops]).astype(np.float32)
    clean.flags.writeable = False
    return TrainingSet(clean=clean, noise_sigma=float(noise_sigma), seed=int(seed))
