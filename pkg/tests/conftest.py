import pytest

from ruellelab.lattes import flexible_lattes
from ruellelab.rational_map import RationalMap


@pytest.fixture(scope="session")
def lattes40():
    return flexible_lattes(4, 0)


@pytest.fixture(scope="session")
def quad_i():
    # z^2 + i, postcritical set {i, -1 + i, -i, infinity}
    return RationalMap([1j, 0, 1], [1], label="z^2+i")
