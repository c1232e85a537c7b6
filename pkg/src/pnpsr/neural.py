"""Portable denoiser weights format and its NumPy inference runtime.

Externally trained denoisers cross into the toolkit as a single ``.npz``
archive with a fixed operator vocabulary, so any training framework can
produce one and this module can run it without that framework installed.

Archive layout (all arrays float32):

- ``format``: the marker string ``pnpsr-denoiser-weights``.
- ``meta``: one JSON string with keys ``version`` (1), ``bands`` (4),
  ``noise_map`` (true), ``divisibility`` (8), ``in_channels`` (bands+1),
  ``out_channels`` (bands), ``residual`` (true) and ``arch`` with
  ``scales`` >= 1, ``base_width`` >= 1, ``blocks`` >= 1.
- Convolution weights named by position (see ``weight_spec``).

The network is a residual U-shape.  Scale j uses width base_width * 2**j.
Encoder scales run ``blocks`` residual blocks (x + conv3x3(relu(conv3x3(x))))
and descend through a 2x2 stride-2 convolution; the bottom runs ``blocks``
residual blocks; each decoder scale upsamples by nearest-neighbor 2x,
applies a 3x3 convolution, adds the encoder skip, and runs ``blocks``
residual blocks.  A 3x3 head maps the input stack (bands plus one constant
noise-map channel) to base_width and a 3x3 tail maps back to ``bands``
channels of predicted noise, subtracted from the input bands.

Inputs are rank-4 ``(1, bands+1, H, W)`` with H and W divisible by
``divisibility``; outputs are ``(1, bands, H, W)``.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FormatError, ValidationError

FORMAT_MARKER = "pnpsr-denoiser-weights"
FORMAT_VERSION = 1
REQUIRED_BANDS = 4
DIVISIBILITY = 8


def weight_spec(in_channels: int, out_channels: int, scales: int, base_width: int, blocks: int):
    """Mapping of archive key -> required array shape for one architecture."""
    widths = [base_width * (2 ** j) for j in range(scales)]
    spec = {"head.weight": (widths[0], in_channels, 3, 3), "head.bias": (widths[0],)}

    def res_block(prefix, width):
        spec[f"{prefix}.conv1.weight"] = (width, width, 3, 3)
        spec[f"{prefix}.conv1.bias"] = (width,)
        spec[f"{prefix}.conv2.weight"] = (width, width, 3, 3)
        spec[f"{prefix}.conv2.bias"] = (width,)

    for j in range(scales - 1):
        for b in range(blocks):
            res_block(f"enc{j}.block{b}", widths[j])
        spec[f"down{j}.weight"] = (widths[j + 1], widths[j], 2, 2)
        spec[f"down{j}.bias"] = (widths[j + 1],)
    for b in range(blocks):
        res_block(f"bottom.block{b}", widths[-1])
    for j in range(scales - 1):
        spec[f"up{j}.weight"] = (widths[j], widths[j + 1], 3, 3)
        spec[f"up{j}.bias"] = (widths[j],)
        for b in range(blocks):
            res_block(f"dec{j}.block{b}", widths[j])
    spec["tail.weight"] = (out_channels, widths[0], 3, 3)
    spec["tail.bias"] = (out_channels,)
    return spec


def _conv3x3(x, weight, bias):
    c, h, w = x.shape
    o = weight.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))
    col = win.transpose(1, 2, 0, 3, 4).reshape(h * w, c * 9)
    out = col @ weight.reshape(o, c * 9).T
    out += bias
    return out.T.reshape(o, h, w)


def _conv2x2_stride2(x, weight, bias):
    c, h, w = x.shape
    o = weight.shape[0]
    xr = x.reshape(c, h // 2, 2, w // 2, 2).transpose(1, 3, 0, 2, 4).reshape((h // 2) * (w // 2), c * 4)
    out = xr @ weight.reshape(o, c * 4).T
    out += bias
    return out.T.reshape(o, h // 2, w // 2)


def _nearest2x(x):
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


@dataclass(frozen=True)
class NetworkModel:
    """Loaded portable denoiser: validated metadata plus weight arrays."""

    bands: int
    in_channels: int
    out_channels: int
    divisibility: int
    scales: int
    base_width: int
    blocks: int
    weights: dict

    def _res_block(self, prefix, x):
        w = self.weights
        h = _conv3x3(x, w[f"{prefix}.conv1.weight"], w[f"{prefix}.conv1.bias"])
        np.maximum(h, 0.0, out=h)
        h = _conv3x3(h, w[f"{prefix}.conv2.weight"], w[f"{prefix}.conv2.bias"])
        return x + h

    def run(self, x: np.ndarray) -> np.ndarray:
        """Forward pass on one (in_channels, H, W) stack; returns (out_channels, H, W)."""
        x = np.asarray(x, dtype=np.float32)
        if x.ndim != 3 or x.shape[0] != self.in_channels:
            raise ValidationError(
                f"model expects ({self.in_channels}, H, W) input, got shape {x.shape}"
            )
        if x.shape[1] % self.divisibility or x.shape[2] % self.divisibility:
            raise ValidationError(
                f"input dims {x.shape[1]}x{x.shape[2]} not divisible by {self.divisibility}"
            )
        w = self.weights
        h = _conv3x3(x, w["head.weight"], w["head.bias"])
        skips = []
        for j in range(self.scales - 1):
            for b in range(self.blocks):
                h = self._res_block(f"enc{j}.block{b}", h)
            skips.append(h)
            h = _conv2x2_stride2(h, w[f"down{j}.weight"], w[f"down{j}.bias"])
        for b in range(self.blocks):
            h = self._res_block(f"bottom.block{b}", h)
        for j in reversed(range(self.scales - 1)):
            h = _nearest2x(h)
            h = _conv3x3(h, w[f"up{j}.weight"], w[f"up{j}.bias"])
            h = h + skips[j]
            for b in range(self.blocks):
                h = self._res_block(f"dec{j}.block{b}", h)
        residual = _conv3x3(h, w["tail.weight"], w["tail.bias"])
        return x[: self.out_channels] - residual


def save_network(path, weights: dict, scales: int, base_width: int, blocks: int,
                 bands: int = REQUIRED_BANDS) -> None:
    """Write a portable weights archive; shapes are checked against weight_spec."""
    in_channels = bands + 1
    out_channels = bands
    spec = weight_spec(in_channels, out_channels, scales, base_width, blocks)
    missing = sorted(set(spec) - set(weights))
    extra = sorted(set(weights) - set(spec))
    if missing or extra:
        raise ValidationError(f"weight keys mismatch: missing {missing}, extra {extra}")
    payload = {}
    for key, shape in spec.items():
        arr = np.asarray(weights[key], dtype=np.float32)
        if arr.shape != shape:
            raise ValidationError(f"{key}: shape {arr.shape}, expected {shape}")
        payload[key] = arr
    meta = {
        "version": FORMAT_VERSION,
        "bands": bands,
        "noise_map": True,
        "divisibility": DIVISIBILITY,
        "in_channels": in_channels,
        "out_channels": out_channels,
        "residual": True,
        "arch": {"scales": scales, "base_width": base_width, "blocks": blocks},
    }
    buf = io.BytesIO()
    np.savez(buf, format=FORMAT_MARKER, meta=json.dumps(meta), **payload)
    with open(os.fspath(path), "wb") as f:
        f.write(buf.getvalue())


def load_network(path) -> NetworkModel:
    """Load and validate a portable weights archive.

    Raises FileNotFoundError for a missing file, FormatError for files that
    are not this format, and ValidationError for signature mismatches (wrong
    channel counts, inconsistent shapes).
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"denoiser weights file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as npz:
            names = set(npz.files)
            if "format" not in names or "meta" not in names:
                raise FormatError(f"{path}: not a portable denoiser weights file")
            marker = str(npz["format"])
            if marker != FORMAT_MARKER:
                raise FormatError(f"{path}: unknown format marker {marker!r}")
            meta = json.loads(str(npz["meta"]))
            arrays = {k: np.asarray(npz[k], dtype=np.float32) for k in names - {"format", "meta"}}
    except (FormatError, ValidationError):
        raise
    except (OSError, ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: unreadable weights archive: {e}") from None

    if meta.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {meta.get('version')!r}")
    for key in ("bands", "in_channels", "out_channels", "divisibility", "arch"):
        if key not in meta:
            raise FormatError(f"{path}: metadata missing {key!r}")
    bands = int(meta["bands"])
    in_channels = int(meta["in_channels"])
    out_channels = int(meta["out_channels"])
    if not meta.get("noise_map", False):
        raise ValidationError(f"{path}: model lacks the noise-map input channel")
    if bands != REQUIRED_BANDS:
        raise ValidationError(f"{path}: model trained for {bands} bands, toolkit requires {REQUIRED_BANDS}")
    if in_channels != bands + 1:
        raise ValidationError(
            f"{path}: signature mismatch: expects {in_channels} input channels, "
            f"required {bands + 1} ({bands} bands + noise map)"
        )
    if out_channels != bands:
        raise ValidationError(f"{path}: signature mismatch: {out_channels} output channels for {bands} bands")
    if not meta.get("residual", False):
        raise ValidationError(f"{path}: only residual models are supported")
    arch = meta["arch"]
    try:
        scales = int(arch["scales"])
        base_width = int(arch["base_width"])
        blocks = int(arch["blocks"])
    except (KeyError, TypeError, ValueError):
        raise FormatError(f"{path}: malformed arch metadata {arch!r}") from None
    if scales < 1 or base_width < 1 or blocks < 1:
        raise FormatError(f"{path}: degenerate arch metadata {arch!r}")
    spec = weight_spec(in_channels, out_channels, scales, base_width, blocks)
    missing = sorted(set(spec) - set(arrays))
    extra = sorted(set(arrays) - set(spec))
    if missing or extra:
        raise ValidationError(f"{path}: weight keys mismatch: missing {missing}, extra {extra}")
    for key, shape in spec.items():
        if arrays[key].shape != shape:
            raise ValidationError(f"{path}: {key} has shape {arrays[key].shape}, expected {shape}")
        if not np.all(np.isfinite(arrays[key])):
            raise ValidationError(f"{path}: {key} contains non-finite values")
    divisibility = int(meta["divisibility"])
    if divisibility < 2 ** (scales - 1):
        raise FormatError(
            f"{path}: divisibility {divisibility} too small for {scales} scales"
        )
    return NetworkModel(
        bands=bands,
        in_channels=in_channels,
        out_channels=out_channels,
        divisibility=divisibility,
        scales=scales,
        base_width=base_width,
        blocks=blocks,
        weights=arrays,
    )
