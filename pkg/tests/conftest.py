import pytest

from smartirr.fieldsim import SimConfig, generate_training_set
from smartirr.tree import build_tree

FIXTURE_SEED = 1


@pytest.fixture(scope="session")
def training_set_200():
    return generate_training_set(SimConfig(), 200, seed=FIXTURE_SEED)


@pytest.fixture(scope="session")
def fixture_model(training_set_200):
    return build_tree(training_set_200, min_leaf=2, confidence=0.25)
