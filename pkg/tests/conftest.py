from fractions import Fraction

import pytest

from mixmap.construction.map_core import build_map
from mixmap.construction.params import MapParams


@pytest.fixture(scope='session')
def params14():
    return MapParams.create(14, 1)


@pytest.fixture(scope='session')
def params14_r2():
    return MapParams.create(14, 2)


@pytest.fixture(scope='session')
def f14(params14):
    """f_1 for lambda = 14 with the first six levels materialized."""
    return build_map(params14, 6)


@pytest.fixture(scope='session')
def f14_r2(params14_r2):
    return build_map(params14_r2, 3)


@pytest.fixture
def ledger_path(tmp_path):
    return str(tmp_path / 'runs.db')


@pytest.fixture
def delta14(params14):
    return Fraction(1, 14)
