import numpy as np
import pytest

from simtomo.pauli import pauli_from_label
from simtomo.povm import computational_povm
from simtomo.sim import basis_state, bit_flip_noise


@pytest.fixture
def example():
    """Two-qubit basis state |01> under 10% independent bit flips."""
    return basis_state("01"), bit_flip_noise([0.1, 0.1]), computational_povm(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def label(s):
    return pauli_from_label(s)
