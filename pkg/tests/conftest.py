import numpy as np
import pytest

from pnpsr.forward import ForwardModel, apply_forward, add_noise, gaussian_kernel
from pnpsr.scenes import river_scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def blur_model():
    """The experiment operating point: 4x4 Gaussian blur, 3x decimation."""
    return ForwardModel(kernel=gaussian_kernel(4, 0.7), s=3, noise_sigma=0.09)


@pytest.fixture(scope="session")
def hr_scene():
    return river_scene(96, 96, 4242)


@pytest.fixture(scope="session")
def lr_scene(hr_scene, blur_model):
    return add_noise(apply_forward(hr_scene, blur_model), 0.09, seed=99)
