"""Minimal reader for MSR multispectral crop files.

The trainer consumes crops through the on-disk contract only: a little-endian
header (magic ``MSRF``, version, band count, height, width, pixel size, scale
factor), a table of 16-byte ASCII band labels, then band-sequential row-major
float32 planes.  Writing is out of scope; crops come from the consumer
toolkit or any other producer of the format.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

MSR_MAGIC = b"MSRF"
MSR_VERSION = 1
_HEADER = struct.Struct("<4sHHIIff")
_LABEL_BYTES = 16


@dataclass(frozen=True)
class Crop:
    """One multispectral crop: float32 (bands, height, width) plus labels."""

    data: np.ndarray
    band_names: tuple
    pixel_size: float

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def load_crop(path) -> Crop:
    """Read one MSR file; FormatError on malformed or truncated input."""
    path = os.fspath(path)
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than MSR header")
    magic, version, band_count, height, width, pixel_size, _scale = _HEADER.unpack_from(blob)
    if magic != MSR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != MSR_VERSION:
        raise FormatError(f"{path}: unsupported MSR version {version}")
    if band_count < 1 or height < 1 or width < 1:
        raise FormatError(f"{path}: degenerate header dims {band_count}x{height}x{width}")
    offset = _HEADER.size
    if len(blob) < offset + band_count * _LABEL_BYTES:
        raise FormatError(f"{path}: truncated band label table")
    names = []
    for i in range(band_count):
        raw = blob[offset + i * _LABEL_BYTES: offset + (i + 1) * _LABEL_BYTES]
        try:
            names.append(raw.split(b"\x00", 1)[0].decode("ascii"))
        except UnicodeDecodeError:
            raise FormatError(f"{path}: band label {i} is not ASCII") from None
    offset += band_count * _LABEL_BYTES
    expected = band_count * height * width * 4
    if len(blob) - offset != expected:
        raise FormatError(f"{path}: payload holds {len(blob) - offset} bytes, header implies {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(band_count, height, width)
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: crop contains non-finite values")
    return Crop(data=data.copy(), band_names=tuple(names), pixel_size=float(pixel_size))


def load_corpus(directory, bands: int) -> list:
    """Load every .msr crop under directory, requiring a uniform band count."""
    directory = os.fspath(directory)
    if not os.path.isdir(directory):
        raise ValidationError(f"crop directory not found: {directory}")
    crops = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".msr"):
            continue
        crop = load_crop(os.path.join(directory, name))
        if crop.band_count != bands:
            raise ValidationError(
                f"{name}: has {crop.band_count} bands, corpus requires {bands}"
            )
        crops.append(crop)
    if not crops:
        raise ValidationError(f"no .msr crops found in {directory}")
    return crops
