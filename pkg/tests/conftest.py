import pytest

from emq.reduction import run_reduction
from emq.systems import free_particle, free_particle_lambda, harmonic


@pytest.fixture(scope="session")
def free_model():
    return free_particle()


@pytest.fixture(scope="session")
def ho_model():
    return harmonic()


@pytest.fixture(scope="session")
def lam_model():
    return free_particle_lambda()


@pytest.fixture(scope="session")
def free_reduced(free_model):
    m = free_model
    return run_reduction(m.system, m.constraint, m.darboux)[3].system


@pytest.fixture(scope="session")
def ho_reduced(ho_model):
    m = ho_model
    return run_reduction(m.system, m.constraint, m.darboux)[3].system


@pytest.fixture(scope="session")
def lam_reduced(lam_model):
    m = lam_model
    return run_reduction(m.system, m.constraint, m.darboux)[3].system
