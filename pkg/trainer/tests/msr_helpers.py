"""MSR file crafting for fixtures: an independent writer of the crop format
(and deliberately of malformed variants), kept in its own module so tests in
other trees never shadow it."""

import struct

import numpy as np

BAND_NAMES = ("blue", "green", "red", "nir")

_HEADER = struct.Struct("<4sHHIIff")


def write_msr(path, data, band_names=BAND_NAMES, pixel_size=10.0, scale_applied=1.0,
              magic=b"MSRF", version=1):
    data = np.asarray(data, dtype="<f4")
    bands, h, w = data.shape
    blob = _HEADER.pack(magic, version, bands, h, w, pixel_size, scale_applied)
    blob += b"".join(n.encode("ascii").ljust(16, b"\x00") for n in band_names)
    blob += data.tobytes()
    path.write_bytes(blob)
    return path
