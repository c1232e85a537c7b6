"""Writer for the portable denoiser weights archive.

This is the trainer's half of the cross-framework contract: a single ``.npz``
holding a ``format`` marker, a ``meta`` JSON string (version, bands,
noise-map flag, divisibility, channel counts, residual flag, arch), and one
float32 array per convolution, keyed by position.  The consumer side loads
the archive into its own runtime without any training framework installed,
so every key and shape is pinned here before writing.
"""

from __future__ import annotations

import io
import json
import os

import numpy as np

from .errors import ValidationError

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


def export_weights(path, weights: dict, scales: int, base_width: int, blocks: int) -> None:
    """Write trained weights to the portable archive.

    weights maps archive keys to arrays (anything np.asarray accepts).  The
    key set and every shape are validated against the 4-band contract before
    anything is written; a wrong channel count is refused, not coerced.
    """
    in_channels = REQUIRED_BANDS + 1
    out_channels = REQUIRED_BANDS
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
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{key}: refusing to export non-finite weights")
        payload[key] = arr
    meta = {
        "version": FORMAT_VERSION,
        "bands": REQUIRED_BANDS,
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
