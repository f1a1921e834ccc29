import numpy as np
import pytest

from schemas import DickeParams, EnsembleSpec
from services import rmt_service


def random_hermitian_pair(dim: int, seed: int):
    """Seeded GOE pair (H, H')."""
    spec = EnsembleSpec(kind="GOE", dim=dim, seed=seed)
    return rmt_service.sample_matrix(spec, 0), rmt_service.sample_matrix(spec, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def goe_pair():
    return random_hermitian_pair(30, seed=7)


@pytest.fixture
def small_dicke():
    return DickeParams(n_atoms=4, boson_cutoff=16, coupling=0.3)


@pytest.fixture
def tiny_dicke():
    return DickeParams(n_atoms=2, boson_cutoff=8)


@pytest.fixture
def make_pair():
    return random_hermitian_pair
