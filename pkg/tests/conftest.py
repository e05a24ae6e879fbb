from __future__ import annotations

import pytest

from subfrac.group import get_gauge, get_group
from subfrac.orlicz import make_orlicz
from subfrac.quadrature import QuadratureSpec


@pytest.fixture(scope="session")
def r1():
    g = get_group("r1")
    return g, get_gauge(g, "euclidean")


@pytest.fixture(scope="session")
def r2():
    g = get_group("r2")
    return g, get_gauge(g, "euclidean")


@pytest.fixture(scope="session")
def h1():
    g = get_group("h1")
    return g, get_gauge(g, "koranyi")


@pytest.fixture(scope="session")
def sq():
    return make_orlicz("power", 2.0)


@pytest.fixture(scope="session")
def plog():
    return make_orlicz("power_log", 2.0)


@pytest.fixture(scope="session")
def small():
    return QuadratureSpec(samples=2**13)
