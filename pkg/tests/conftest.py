import functools

import pytest

from drawdown_selling import solve
from drawdown_selling.cli import load_config
from drawdown_selling.value_function import ValueSurface


@functools.lru_cache(maxsize=None)
def config(name):
    return load_config(name)


@functools.lru_cache(maxsize=None)
def solved(name):
    cfg = config(name)
    return solve(cfg.model, cfg.prefs)


@functools.lru_cache(maxsize=None)
def surface(name):
    return ValueSurface(solved(name))


@pytest.fixture(scope="session")
def mild_take_profit():
    return solved("mild_take_profit")


@pytest.fixture(scope="session")
def severe_high_tolerance():
    return solved("severe_high_tolerance")


@pytest.fixture(scope="session")
def severe_low_tolerance():
    return solved("severe_low_tolerance")
