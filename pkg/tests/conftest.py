import numpy as np
import pytest

from slagflow.polynomial import ComplexPoly


@pytest.fixture(scope="session")
def p_pair():
    """t^2 - 1."""
    return ComplexPoly((-1.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def p_three():
    """Roots -1, 0.2i, 1 (sorted in that order)."""
    return ComplexPoly.from_roots([-1.0, 0.2j, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
