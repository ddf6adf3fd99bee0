import functools
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from ibcfem import build_unit_square_mesh, builtin_problems  # noqa: E402

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

MESHES = (10, 20, 40, 80)


@functools.lru_cache(maxsize=None)
def mesh(n: int, diagonal: str = "right"):
    return build_unit_square_mesh(n, diagonal=diagonal)


@functools.lru_cache(maxsize=None)
def problems():
    return builtin_problems()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def test1():
    return problems()["test1"]


@pytest.fixture(scope="session")
def test2():
    return problems()["test2"]
