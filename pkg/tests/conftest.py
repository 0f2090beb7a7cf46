import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fibersieve.modes import FiberSpec  # noqa: E402
from fibersieve.particles import ParticleSpec  # noqa: E402
from fibersieve.taper import BeamConfig, TaperGeometry, balance_power, force_profile  # noqa: E402


@pytest.fixture(scope="session")
def fiber():
    return FiberSpec()


@pytest.fixture(scope="session")
def gns100():
    return ParticleSpec(100.0)


@pytest.fixture(scope="session")
def gns150():
    return ParticleSpec(150.0)


@pytest.fixture(scope="session")
def geometry(fiber):
    return TaperGeometry.uniform(fiber, 400.0, 1.0)


@pytest.fixture(scope="session")
def balance100(gns100, fiber):
    return balance_power(gns100, fiber, 12.0)


@pytest.fixture(scope="session")
def profile_factory(geometry):
    cache = {}

    def make(particle, p1_mW, p2_mW=12.0):
        key = (particle, round(p1_mW, 12), p2_mW)
        if key not in cache:
            cache[key] = force_profile(geometry, particle, BeamConfig(p1_mW, p2_mW))
        return cache[key]

    return make
