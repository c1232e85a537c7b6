import numpy as np
import pytest

from msr_helpers import write_msr


@pytest.fixture
def crop_dir(tmp_path):
    """Eight 16x16 4-band crops with deterministic content."""
    rng = np.random.default_rng(99)
    d = tmp_path / "crops"
    d.mkdir()
    for i in range(8):
        write_msr(d / f"crop_{i:02d}.msr", rng.random((4, 16, 16)))
    return d
