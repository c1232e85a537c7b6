"""Denoiser trainer: fits a residual U-net on noisy/clean multispectral
crops and exports it to the portable weights archive consumed by the
super-resolution toolkit.  The two sides share only file formats: MSR crops
in, weights archive out."""

from .archive import DIVISIBILITY, FORMAT_MARKER, REQUIRED_BANDS, export_weights, weight_spec
from .data import TrainingSet, build_pairs
from .errors import FormatError, TrainerError, TrainingError, ValidationError
from .model import NetworkArch, ResidualUNet, build_network, network_weights
from .msr import Crop, load_corpus, load_crop
from .train import (
    TrainConfig,
    TrainResult,
    denoise_stack,
    desk_preset,
    full_preset,
    train,
    write_loss_curve,
)

__all__ = [
    "Crop",
    "DIVISIBILITY",
    "FORMAT_MARKER",
    "FormatError",
    "NetworkArch",
    "REQUIRED_BANDS",
    "ResidualUNet",
    "TrainConfig",
    "TrainResult",
    "TrainerError",
    "TrainingError",
    "TrainingSet",
    "ValidationError",
    "build_network",
    "build_pairs",
    "denoise_stack",
    "desk_preset",
    "export_weights",
    "load_corpus",
    "load_crop",
    "full_preset",
    "network_weights",
    "train",
    "weight_spec",
    "write_loss_curve",
]
