"""Training loop: residual MSE on noisy/clean pairs, AdamW + step decay.

Runs are reproducible: network init comes from the config seed, per-epoch
noise and batch order come from (seed, epoch), and all arithmetic stays on
CPU float32.  Two presets are provided; the desk preset trains a usable
model in minutes, the full preset keeps the same hyperparameters
(learning rate 0.001, step 100, decay 0.5, batch 4, sigma 0.09) at full
epoch count.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, fields, replace

import numpy as np
import torch

from .data import TrainingSet, epoch_rng
from .errors import TrainingError, ValidationError
from .model import NetworkArch, ResidualUNet, build_network, network_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    learning_rate zero is allowed (a flat-curve diagnostic); every other
    numeric field must be positive, the seed nonnegative, and crop_size
    divisible by 8 to satisfy the exported model's divisibility contract.
    """

    noise_sigma: float = 0.09
    batch_size: int = 4
    epochs: int = 50
    learning_rate: float = 0.001
    lr_step: int = 100
    lr_gamma: float = 0.5
    crop_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma > 0):
            raise ValidationError(f"noise_sigma must be positive, got {self.noise_sigma}")
        for name in ("batch_size", "epochs", "lr_step", "crop_size"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValidationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (np.isfinite(self.lr_gamma) and self.lr_gamma > 0):
            raise ValidationError(f"lr_gamma must be positive, got {self.lr_gamma}")
        if self.crop_size % 8:
            raise ValidationError(f"crop_size must be divisible by 8, got {self.crop_size}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")


def desk_preset(**overrides) -> TrainConfig:
    """Small, fast configuration: 50 epochs on 64x64 crops."""
    return replace(TrainConfig(), **overrides)


def full_preset(**overrides) -> TrainConfig:
    """Same hyperparameters at full length: 1500 epochs."""
    return replace(TrainConfig(epochs=1500), **overrides)


@dataclass(frozen=True)
class TrainResult:
    """Trained weights (archive key vocabulary) plus the per-epoch loss curve."""

    weights: dict
    losses: tuple
    arch: NetworkArch
    config: TrainConfig


def _input_stack(noisy: np.ndarray, sigma: float) -> np.ndarray:
    n, _, h, w = noisy.shape
    noise_map = np.full((n, 1, h, w), sigma, dtype=np.float32)
    return np.concatenate([noisy, noise_map], axis=1)


def train(cfg: TrainConfig, training_set: TrainingSet, arch: NetworkArch = NetworkArch()) -> TrainResult:
    """Run the full loop and return weights plus the loss curve.

    Raises TrainingError with epoch/batch diagnostics if the loss goes
    non-finite; raises ValidationError if the corpus geometry does not match
    cfg.crop_size.
    """
    if training_set.crop_size != cfg.crop_size:
        raise ValidationError(
            f"corpus crops are {training_set.crop_size}x{training_set.crop_size}, "
            f"config expects {cfg.crop_size}x{cfg.crop_size}"
        )
    for f in fields(cfg):
        log.info("train config %s = %s", f.name, getattr(cfg, f.name))
    log.info("architecture scales=%d base_width=%d blocks=%d",
             arch.scales, arch.base_width, arch.blocks)

    net = build_network(arch, cfg.seed)
    optimizer = torch.optim.AdamW(net.parameters(), lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=cfg.lr_step, gamma=cfg.lr_gamma
    )
    losses = []
    for epoch in range(cfg.epochs):
        noisy, clean = training_set.epoch_pairs(epoch)
        stack = _input_stack(noisy, training_set.noise_sigma)
        order = epoch_rng(cfg.seed, epoch).permutation(training_set.count)
        total = 0.0
        for start in range(0, training_set.count, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            inp = torch.from_numpy(stack[idx])
            target = torch.from_numpy(clean[idx])
            optimizer.zero_grad()
            loss = torch.mean((net(inp) - target) ** 2)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch} batch {start // cfg.batch_size} "
                    f"(lr {scheduler.get_last_lr()[0]:g}, sigma {training_set.noise_sigma:g})"
                )
            loss.backward()
            optimizer.step()
            total += value * len(idx)
        scheduler.step()
        epoch_loss = total / training_set.count
        losses.append(epoch_loss)
        log.info("epoch %d/%d loss %.6g", epoch + 1, cfg.epochs, epoch_loss)
    return TrainResult(weights=network_weights(net), losses=tuple(losses), arch=arch, config=cfg)


def write_loss_curve(path, losses) -> None:
    """Write the per-epoch loss curve as a two-column CSV."""
    with open(os.fspath(path), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss"])
        for i, value in enumerate(losses):
            writer.writerow([i + 1, np.format_float_scientific(value, precision=9)])


def denoise_stack(net: ResidualUNet, noisy: np.ndarray, sigma: float) -> np.ndarray:
    """Convenience inference on a (count, bands, H, W) stack, no gradients."""
    with torch.no_grad():
        out = net(torch.from_numpy(_input_stack(np.asarray(noisy, dtype=np.float32), sigma)))
    return out.numpy()
