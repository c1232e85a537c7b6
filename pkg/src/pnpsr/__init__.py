"""Multispectral single-image super-resolution with plug-and-play priors.

The pipeline: a calibrated blur-then-decimate forward model degrades
high-resolution scenes to the observed low-resolution grid; a
forward-backward solver inverts it with a pluggable denoiser (classical
proximal operators or an external learned model); water-surface metrics
evaluate the result.
"""

from .calibrate import (
    PairedSample,
    PairingResult,
    calibrate_kernel,
    estimate_noise_image,
    estimate_noise_mad,
    pair_by_time,
)
from .denoise import DenoiserSpec, denoise, load_external, make_denoiser, tv_prox, wavelet_soft_threshold
from .errors import FormatError, PnpsrError, ValidationError
from .forward import (
    ForwardModel,
    Kernel,
    add_noise,
    apply_adjoint,
    apply_forward,
    gaussian_kernel,
    load_kernel,
    operator_norm,
    save_kernel,
)
from .metrics import (
    WaterMask,
    bicubic_upsample,
    ndwi,
    nearest_upsample,
    psnr,
    ssim,
    threshold_water,
    water_area,
)
from .raster import CropWindow, MultispectralImage, band, crop, load_image, save_image
from .scenes import river_scene
from .solver import SolveConfig, SolveReport, SweepCell, best_cell, fb_classic, fb_pnp, sweep
from .workflows import ExperimentConfig, load_config, make_synthetic, run_reconstruct, run_sweep

__version__ = "1.0.0"

__all__ = [
    "CropWindow",
    "DenoiserSpec",
    "ExperimentConfig",
    "FormatError",
    "ForwardModel",
    "Kernel",
    "MultispectralImage",
    "PairedSample",
    "PairingResult",
    "PnpsrError",
    "SolveConfig",
    "SolveReport",
    "SweepCell",
    "ValidationError",
    "WaterMask",
    "add_noise",
    "apply_adjoint",
    "apply_forward",
    "band",
    "best_cell",
    "bicubic_upsample",
    "calibrate_kernel",
    "crop",
    "denoise",
    "estimate_noise_image",
    "estimate_noise_mad",
    "fb_classic",
    "fb_pnp",
    "gaussian_kernel",
    "load_config",
    "load_external",
    "load_image",
    "load_kernel",
    "make_denoiser",
    "make_synthetic",
    "ndwi",
    "nearest_upsample",
    "operator_norm",
    "pair_by_time",
    "psnr",
    "river_scene",
    "run_reconstruct",
    "run_sweep",
    "save_image",
    "save_kernel",
    "ssim",
    "sweep",
    "threshold_water",
    "tv_prox",
    "water_area",
    "wavelet_soft_threshold",
]
