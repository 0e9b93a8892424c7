import numpy as np
import pytest

from tapergp import GridDesign, preset_model, sample_perturbed_grid


@pytest.fixture(scope="session")
def grid10():
    return sample_perturbed_grid(GridDesign(10))


@pytest.fixture(scope="session")
def grid4():
    return sample_perturbed_grid(GridDesign(4))


@pytest.fixture(scope="session")
def model_a():
    return preset_model("A")


@pytest.fixture(scope="session")
def model_b():
    return preset_model("B")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
