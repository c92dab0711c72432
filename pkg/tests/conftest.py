import pytest

from qmlab.grid import GridSpace


@pytest.fixture
def square6() -> GridSpace:
    return GridSpace(6, 6)


@pytest.fixture
def square4() -> GridSpace:
    return GridSpace(4, 4)


@pytest.fixture
def inf9() -> GridSpace:
    return GridSpace(9, 9, mode="marked_infinity")


def cells_to_bits(cells) -> int:
    bits = 0
    for c in cells:
        bits |= 1 << c
    return bits
