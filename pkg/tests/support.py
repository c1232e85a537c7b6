"""Shared test helpers importable by name (kept out of conftest so the
module name stays unique when several test trees run in one session)."""

import numpy as np

from pnpsr.raster import SUPPORTED_BANDS, MultispectralImage


def make_image(data, pixel_size=10.0) -> MultispectralImage:
    data = np.asarray(data, dtype=np.float64)
    return MultispectralImage(
        data=data, band_names=SUPPORTED_BANDS[: data.shape[0]], pixel_size=pixel_size
    )


def random_image(rng, bands=4, height=24, width=24, pixel_size=10.0) -> MultispectralImage:
    return make_image(rng.uniform(0.0, 1.0, size=(bands, height, width)), pixel_size)
