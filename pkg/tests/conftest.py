import pytest

from robpwprg.instances import random_family, random_robp
from robpwprg.rng import make_rng


@pytest.fixture
def rng():
    return make_rng(20240611)


def family(cls, n, w, s, count, seed=0, accept="random"):
    return random_family(make_rng(seed), cls, n, w, s, count, accept)


def one(cls, n, w, s, seed=0, accept="random"):
    return random_robp(make_rng(seed), cls, n, w, s, accept)
