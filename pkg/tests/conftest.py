import pytest
from hypothesis import settings

from disccool.disc_field import make_grid
from disccool.sources import parse_source

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid256():
    return make_grid(256, 64)


@pytest.fixture(scope="session")
def grid512():
    return make_grid(512, 64)


@pytest.fixture(scope="session")
def constant():
    return parse_source("constant")


@pytest.fixture(scope="session")
def quadrupole():
    return parse_source("quadrupole")
