"""Residual U-shaped denoiser, defined to match the portable archive layout.

Module attribute names are chosen so ``state_dict()`` keys coincide exactly
with the archive key vocabulary (``head``, ``enc{j}.block{b}.conv1``, ...):
export is then a plain dump of the state dict, and the consumer's NumPy
runtime reproduces this forward pass operator by operator (zero-padded 3x3
convolutions, 2x2 stride-2 downsampling, nearest-neighbor 2x upsampling,
encoder skips added after the decoder convolution, residual subtraction at
the end).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .archive import REQUIRED_BANDS, weight_spec
from .errors import ValidationError


@dataclass(frozen=True)
class NetworkArch:
    """Architecture knobs: scale count, width at the top scale, blocks per stage.

    The desk-scale default (2 scales, base width 32) is deliberately small;
    widths double at each scale below the first.
    """

    scales: int = 2
    base_width: int = 32
    blocks: int = 2

    def __post_init__(self):
        if self.scales < 1 or self.base_width < 1 or self.blocks < 1:
            raise ValidationError(
                f"architecture fields must be positive, got {self}"
            )


class ResBlock(nn.Module):
    """x + conv3x3(relu(conv3x3(x))), width preserved."""

    def __init__(self, width: int):
        super().__init__()
        self.conv1 = nn.Conv2d(width, width, 3, padding=1)
        self.conv2 = nn.Conv2d(width, width, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class Stage(nn.Module):
    """A run of residual blocks at one width."""

    def __init__(self, width: int, blocks: int):
        super().__init__()
        self.count = blocks
        for b in range(blocks):
            setattr(self, f"block{b}", ResBlock(width))

    def forward(self, x):
        for b in range(self.count):
            x = getattr(self, f"block{b}")(x)
        return x


class ResidualUNet(nn.Module):
    """Denoiser mapping (N, bands+1, H, W) stacks to (N, bands, H, W).

    The final input channel is a constant noise-map plane; the tail predicts
    the noise, which is subtracted from the band channels.
    """

    def __init__(self, arch: NetworkArch = NetworkArch()):
        super().__init__()
        self.arch = arch
        self.bands = REQUIRED_BANDS
        self.in_channels = REQUIRED_BANDS + 1
        widths = [arch.base_width * (2 ** j) for j in range(arch.scales)]
        self.head = nn.Conv2d(self.in_channels, widths[0], 3, padding=1)
        for j in range(arch.scales - 1):
            setattr(self, f"enc{j}", Stage(widths[j], arch.blocks))
            setattr(self, f"down{j}", nn.Conv2d(widths[j], widths[j + 1], 2, stride=2))
        self.bottom = Stage(widths[-1], arch.blocks)
        for j in range(arch.scales - 1):
            setattr(self, f"up{j}", nn.Conv2d(widths[j + 1], widths[j], 3, padding=1))
            setattr(self, f"dec{j}", Stage(widths[j], arch.blocks))
        self.tail = nn.Conv2d(widths[0], self.bands, 3, padding=1)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValidationError(
                f"expected (N, {self.in_channels}, H, W) input, got shape {tuple(x.shape)}"
            )
        step = 2 ** (self.arch.scales - 1)
        if x.shape[2] % step or x.shape[3] % step:
            raise ValidationError(
                f"input dims {x.shape[2]}x{x.shape[3]} not divisible by {step}"
            )
        h = self.head(x)
        skips = []
        for j in range(self.arch.scales - 1):
            h = getattr(self, f"enc{j}")(h)
            skips.append(h)
            h = getattr(self, f"down{j}")(h)
        h = self.bottom(h)
        for j in reversed(range(self.arch.scales - 1)):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = getattr(self, f"up{j}")(h)
            h = h + skips[j]
            h = getattr(self, f"dec{j}")(h)
        residual = self.tail(h)
        return x[:, : self.bands] - residual


def build_network(arch: NetworkArch, seed: int) -> ResidualUNet:
    """Construct a network with seed-determined initial weights."""
    torch.manual_seed(seed)
    net = ResidualUNet(arch)
    expected = weight_spec(net.in_channels, net.bands, arch.scales, arch.base_width, arch.blocks)
    got = {k: tuple(v.shape) for k, v in net.state_dict().items()}
    # construction and archive vocabulary must never drift apart
    assert got == expected, sorted(set(got) ^ set(expected))
    return net


def network_weights(net: ResidualUNet) -> dict:
    """State dict as plain float32 arrays, keyed by archive vocabulary."""
    return {k: v.detach().cpu().numpy().astype("float32") for k, v in net.state_dict().items()}
