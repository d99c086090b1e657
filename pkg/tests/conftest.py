import pytest

from defectperc.animals import enumerate_census


@pytest.fixture(scope="session")
def census32():
    """Full d=3 census to the default cap (8 edges); about half a minute."""
    return enumerate_census(3, 2, 8)


@pytest.fixture(scope="session")
def census42():
    """Full d=4 census to the default cap (6 edges)."""
    return enumerate_census(4, 2, 6)


@pytest.fixture(scope="session")
def census32_small():
    """Cheap d=3 census (cap 4) for unit tests."""
    return enumerate_census(3, 2, 4)


@pytest.fixture(scope="session")
def census22_small():
    """Cheap d=2 census (cap 4)."""
    return enumerate_census(2, 2, 4)
