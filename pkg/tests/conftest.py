import numpy as np
import pytest

from sensorsched import Belief, ConstantPolicy, PomdpModel, ThresholdPolicy

BINARY_ENTROPY_01 = 0.4689955935892812  # -0.9 log2 0.9 - 0.1 log2 0.1


def random_model(rng, num_states=None, num_obs=None, num_sensors=None):
    """Dirichlet-row model; strictly positive, so generically unichain."""
    m = num_states or int(rng.integers(2, 4))
    l = num_obs or int(rng.integers(2, 4))
    a = num_sensors or int(rng.integers(1, 3))
    return PomdpModel(
        transition=rng.dirichlet(np.ones(m), size=m),
        sensors=tuple(rng.dirichlet(np.ones(l), size=m) for _ in range(a)),
    )


def random_belief(rng, m):
    return Belief(rng.dirichlet(np.ones(m)))


def random_policy(rng, model):
    """Belief-dependent when the model allows it, constant otherwise."""
    if model.num_sensors >= 2 and model.num_states == 2:
        return ThresholdPolicy(float(rng.uniform(0.1, 0.9)))
    return ConstantPolicy(int(rng.integers(model.num_sensors)))


@pytest.fixture
def symmetric_q():
    return np.array([[0.9, 0.1], [0.1, 0.9]])


@pytest.fixture
def perfect_model(symmetric_q):
    """Identity sensor: observations reveal the state exactly."""
    return PomdpModel(transition=symmetric_q, sensors=(np.eye(2),))


@pytest.fixture
def uninformative_model(symmetric_q):
    """Both emission rows identical: observations carry no information."""
    return PomdpModel(
        transition=symmetric_q,
        sensors=(np.array([[0.5, 0.5], [0.5, 0.5]]),),
    )


@pytest.fixture
def cross_model(symmetric_q):
    """Two complementary sensors, each sharp in one state only."""
    return PomdpModel(
        transition=symmetric_q,
        sensors=(
            np.array([[0.95, 0.05], [0.5, 0.5]]),
            np.array([[0.5, 0.5], [0.05, 0.95]]),
        ),
    )
