# -*- coding: utf-8 -*-

import numpy as np
import pytest

from dapgkit.core import FlatVector, Trajectory, SampleBatch
from dapgkit.nnet import MlpSpec, MlpParams
from dapgkit.policy import GaussianPolicy, act


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def linear_policy():
    """A policy without hidden layers: mean = W obs + b with 3 inputs and 2 outputs."""
    spec = MlpSpec(3, (), 2)
    params = MlpParams(FlatVector(np.linspace(-0.5, 0.5, spec.parameter_count)))
    return GaussianPolicy(spec, params, np.array([-0.2, 0.1]))


@pytest.fixture()
def small_policy():
    """A tanh policy with 24 parameters in total."""
    return GaussianPolicy.create(2, 2, (4, ), seed=7, init_log_std=-0.3)


@pytest.fixture()
def sample_batch(small_policy, rng):
    observations = rng.standard_normal((20, 2))
    actions = np.stack([act(small_policy, o, rng)[0] for o in observations])
    return SampleBatch(observations, actions, rng.standard_normal(20))


@pytest.fixture()
def toy_trajectory():
    observations = np.arange(8, dtype=np.float64).reshape(4, 2) / 10.0
    actions = np.ones((4, 1))
    return Trajectory.from_arrays(observations, actions, [1.0, 0.0, -1.0, 2.0], np.zeros(4), [0.8, 0.9])


def random_policy(rng, max_layers=3, max_width=8):
    """Draw a random small policy (at most max_layers layers in total)."""
    n_hidden = int(rng.integers(0, max_layers))
    hidden = tuple(int(w) for w in rng.integers(1, max_width + 1, size=n_hidden))
    spec = MlpSpec(int(rng.integers(1, max_width + 1)), hidden, int(rng.integers(1, 4)))
    params = MlpParams(FlatVector(rng.uniform(-1.0, 1.0, spec.parameter_count)))
    return GaussianPolicy(spec, params, rng.uniform(-1.0, 0.5, spec.output_dim))


@pytest.fixture()
def make_random_policy():
    return random_policy
