import numpy as np
import pytest

from qdmft.params import SiamParams


@pytest.fixture
def fig_params():
    """Half-filled reference point U = 4, V = 1 (units of t*)."""
    return SiamParams(u=4.0, mu=2.0, epsilon_c=0.0, v=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, n_qubits):
    v = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return v / np.linalg.norm(v)
