"""Multispectral image data model and MSR file I/O.

The in-memory model is a band-major float array wrapped in an immutable
:class:`MultispectralImage`.  The on-disk MSR format is a direct dump of that
layout: a fixed little-endian header followed by band-sequential, row-major
32-bit float planes.  PNG export is provided for visual inspection only and is
never read back.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

SUPPORTED_BANDS = ("blue", "green", "red", "nir")

MSR_MAGIC = b"MSRF"
MSR_VERSION = 1
_HEADER = struct.Struct("<4sHHIIff")
_LABEL_BYTES = 16


@dataclass(frozen=True)
class MultispectralImage:
    """Immutable multispectral raster: band-major, row-major within band.

    data: (bands, height, width) float array, finite values.
    band_names: unique labels drawn from SUPPORTED_BANDS, in band order.
    pixel_size: ground sampling distance in meters/pixel (10.0 on the HR
        grid, 30.0 on the LR grid).
    scale_applied: digital-number scale factor applied at ingestion to map
        values into [0, 1]; carried through the file header for provenance.
    """

    data: np.ndarray
    band_names: tuple[str, ...]
    pixel_size: float
    scale_applied: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValidationError(f"expected (bands, height, width) data, got shape {data.shape}")
        names = tuple(self.band_names)
        if len(names) != data.shape[0]:
            raise ValidationError(f"{len(names)} band names for {data.shape[0]} planes")
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate band names: {names}")
        for name in names:
            if name not in SUPPORTED_BANDS:
                raise ValidationError(f"unknown band {name!r}; supported: {SUPPORTED_BANDS}")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValidationError(f"empty image: shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("image contains non-finite values")
        if not (np.isfinite(self.pixel_size) and self.pixel_size > 0):
            raise ValidationError(f"pixel_size must be positive, got {self.pixel_size}")
        data = np.ascontiguousarray(data)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "band_names", names)
        object.__setattr__(self, "pixel_size", float(self.pixel_size))
        object.__setattr__(self, "scale_applied", float(self.scale_applied))

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def band(self, name: str) -> np.ndarray:
        """Return the named band plane (read-only 2-D view)."""
        try:
            i = self.band_names.index(name)
        except ValueError:
            raise ValidationError(
                f"unknown band {name!r}; image has {self.band_names}"
            ) from None
        return self.data[i]

    def with_data(self, data: np.ndarray, pixel_size: float | None = None) -> "MultispectralImage":
        """New image with replaced pixel data, same band semantics."""
        return MultispectralImage(
            data=data,
            band_names=self.band_names,
            pixel_size=self.pixel_size if pixel_size is None else pixel_size,
            scale_applied=self.scale_applied,
        )

    @classmethod
    def from_planes(cls, planes, pixel_size: float, scale_applied: float = 1.0):
        """Build an image from an ordered mapping or list of (name, 2-D plane)."""
        items = list(planes.items()) if hasattr(planes, "items") else list(planes)
        names = tuple(name for name, _ in items)
        arrays = [np.asarray(p, dtype=np.float64) for _, p in items]
        if not arrays:
            raise ValidationError("no band planes given")
        shape = arrays[0].shape
        for name, arr in zip(names, arrays):
            if arr.ndim != 2:
                raise ValidationError(f"band {name!r} is not a 2-D plane")
            if arr.shape != shape:
                raise ValidationError(f"band {name!r} shape {arr.shape} != {shape}")
        return cls(np.stack(arrays), names, pixel_size, scale_applied)


@dataclass(frozen=True)
class CropWindow:
    """Rectangular pixel window; must lie fully inside its source image."""

    origin_row: int
    origin_col: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"empty crop window {self}")
        if self.origin_row < 0 or self.origin_col < 0:
            raise ValidationError(f"negative crop origin {self}")

    def compose(self, inner: "CropWindow") -> "CropWindow":
        """Window equivalent to cropping by self and then by inner."""
        return CropWindow(
            origin_row=self.origin_row + inner.origin_row,
            origin_col=self.origin_col + inner.origin_col,
            height=inner.height,
            width=inner.width,
        )


def band(img: MultispectralImage, name: str) -> np.ndarray:
    """Return the named band plane of img."""
    return img.band(name)


def crop(img: MultispectralImage, w: CropWindow) -> MultispectralImage:
    """Extract a window; dims become window dims, pixel_size is preserved."""
    if w.origin_row + w.height > img.height or w.origin_col + w.width > img.width:
        raise ValidationError(
            f"crop window {w} exceeds image bounds {img.height}x{img.width}"
        )
    sub = img.data[:, w.origin_row:w.origin_row + w.height, w.origin_col:w.origin_col + w.width]
    return img.with_data(sub.copy())


def _encode_label(name: str) -> bytes:
    raw = name.encode("ascii")
    if len(raw) > _LABEL_BYTES:
        raise ValidationError(f"band label {name!r} longer than {_LABEL_BYTES} bytes")
    return raw.ljust(_LABEL_BYTES, b"\x00")


def save_image(img: MultispectralImage, path) -> None:
    """Write img to path in MSR format (header + band-sequential f32 payload).

    The write is atomic: a temp file in the target directory is renamed over
    path only after the full payload is written.
    """
    if not np.all(np.isfinite(img.data)):
        raise ValidationError("refusing to save image with non-finite values")
    path = os.fspath(path)
    header = _HEADER.pack(
        MSR_MAGIC, MSR_VERSION, img.band_count, img.height, img.width,
        np.float32(img.pixel_size), np.float32(img.scale_applied),
    )
    labels = b"".join(_encode_label(n) for n in img.band_names)
    payload = img.data.astype("<f4").tobytes()
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".msr.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            f.write(labels)
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_image(path) -> MultispectralImage:
    """Read an MSR file written by save_image.

    Raises FormatError for a malformed or truncated file and ValidationError
    for payloads that violate image invariants (non-finite values, unknown
    band labels).
    """
    path = os.fspath(path)
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than MSR header")
    magic, version, band_count, height, width, pixel_size, scale_applied = _HEADER.unpack_from(blob)
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
            name = raw.split(b"\x00", 1)[0].decode("ascii")
        except UnicodeDecodeError:
            raise FormatError(f"{path}: band label {i} is not ASCII") from None
        names.append(name)
    offset += band_count * _LABEL_BYTES
    expected = band_count * height * width * 4
    got = len(blob) - offset
    if got != expected:
        raise FormatError(
            f"{path}: payload holds {got} bytes, header implies {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(band_count, height, width)
    return MultispectralImage(
        data=data.astype(np.float64),
        band_names=tuple(names),
        pixel_size=float(pixel_size),
        scale_applied=float(scale_applied),
    )


def _stretch_to_u8(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (values - lo) / (hi - lo)
    return (np.clip(scaled, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_rgb_png(img: MultispectralImage, path, bands=("red", "green", "blue")) -> None:
    """Export a min-max stretched RGB composite for visual inspection."""
    from PIL import Image

    stack = np.stack([img.band(b) for b in bands], axis=-1)
    Image.fromarray(_stretch_to_u8(stack), mode="RGB").save(os.fspath(path))


def save_plane_png(plane: np.ndarray, path) -> None:
    """Export one 2-D plane as a min-max stretched grayscale PNG."""
    from PIL import Image

    arr = np.asarray(plane, dtype=np.float64)
    Image.fromarray(_stretch_to_u8(arr), mode="L").save(os.fspath(path))
