import numpy as np
import pytest

from pulsedca.lattice import Polymer, Species


@pytest.fixture
def abc_polymer() -> Polymer:
    """Plain 2-state ABC chain, 10 triples."""
    return Polymer((Species("A"), Species("B"), Species("C")), 30)


@pytest.fixture
def ecc_polymer() -> Polymer:
    """ABC chain whose B units have the fast-decaying third level."""
    return Polymer((Species("A"), Species("B", 3, (2, 0)), Species("C")), 30)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240115)
