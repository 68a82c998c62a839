import numpy as np
import pytest

from app.schemas.medium import MediumParams
from app.services.eigen import solve_families


@pytest.fixture
def isotropic_medium() -> MediumParams:
    """albedo 0.9, isotropic scattering, N=16."""
    return MediumParams(mu_a=0.1, mu_s=0.9, g=0.0, l_max=0, N=16)


@pytest.fixture
def linear_medium() -> MediumParams:
    """albedo 0.9, phase function truncated at l_max=1."""
    return MediumParams(mu_a=0.1, mu_s=0.9, g=0.5, l_max=1, N=9)


@pytest.fixture
def tissue_medium() -> MediumParams:
    """Reference tissue-like medium: mu_a=0.01/mm, mu_s=10/mm, g=0.9, l_max=N=9."""
    return MediumParams(mu_a=0.01, mu_s=10.0, g=0.9, l_max=9, N=9)


@pytest.fixture
def small_medium() -> MediumParams:
    """Cheap medium for convolution and CLI tests (mu_t = 1/mm)."""
    return MediumParams(mu_a=0.1, mu_s=0.9, g=0.0, l_max=0, N=2)


@pytest.fixture
def linear_families(linear_medium):
    return solve_families(linear_medium)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
