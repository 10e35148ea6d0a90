# -*- coding: utf-8 -*-

"""
The state-value baseline V(s), regressed onto Monte-Carlo discounted returns.

Targets are standardized (zero mean, unit variance) before every fit; the network
predicts in standardized units and predictions are mapped back with the stored
target statistics. Before fitting on new statistics, the output layer is rescaled
so that current predictions are preserved.
"""

import logging

import attr
import numpy as np
from attr.validators import instance_of

from .core import FlatVector
from .data_abstractions import DataModel
from .exceptions import InvalidInputError
from .nnet import MlpSpec, MlpParams, forward_batch, backward_batch
from .reports import FitReport
from .utilities import as_sizes, check_finite, positive

log = logging.getLogger(__name__)

STD_FLOOR = 1e-8


@attr.s(frozen=True)
class FitConfig(DataModel):
    batch_size = attr.ib(default=64, converter=int, validator=positive)
    epochs = attr.ib(default=2, converter=int, validator=attr.validators.ge(0))
    learning_rate = attr.ib(default=1e-3, converter=float, validator=positive)
    hidden_sizes = attr.ib(default=(128, 128), converter=as_sizes)


@attr.s
class ValueFunction(object):
    """
    The value network and the target statistics it predicts in. fit() is single-writer.
    """
    spec = attr.ib(validator=instance_of(MlpSpec))
    params = attr.ib(validator=instance_of(MlpParams))
    fit_config = attr.ib(default=attr.Factory(FitConfig), validator=instance_of(FitConfig))
    target_mean = attr.ib(default=0.0, converter=float)
    target_std = attr.ib(default=1.0, converter=float)

    @classmethod
    def create(cls, observation_dim: int, fit_config: FitConfig = None, seed: int = 0) -> "ValueFunction":
        """
        Create a value function with a freshly initialized network whose output layer is zero,
        so it predicts the target mean until the first fit.

        :param observation_dim:
        :param fit_config:
        :param seed:
        :return:
        """
        fit_config = fit_config if fit_config is not None else FitConfig()
        spec = MlpSpec(observation_dim, fit_config.hidden_sizes, 1)
        return cls(spec, MlpParams.initialize(spec, seed, output_scale=0.0), fit_config)

    @classmethod
    def zeros(cls, observation_dim: int, fit_config: FitConfig = None) -> "ValueFunction":
        fit_config = fit_config if fit_config is not None else FitConfig()
        spec = MlpSpec(observation_dim, fit_config.hidden_sizes, 1)
        return cls(spec, MlpParams.zeros(spec), fit_config)

    @property
    def observation_dim(self) -> int:
        return self.spec.input_dim


def _as_observations(vf: ValueFunction, observations) -> np.ndarray:
    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim == 1:
        observations = observations[np.newaxis, :]
    if observations.ndim != 2 or observations.shape[1] != vf.observation_dim:
        raise InvalidInputError("Observations must have {} columns, got shape {}.".format(
            vf.observation_dim, observations.shape
        ))
    return observations


def predict_batch(vf: ValueFunction, observations) -> np.ndarray:
    """
    Predict V for every row of observations.

    :param vf:
    :param observations:
    :return:
    """
    observations = _as_observations(vf, observations)
    raw = forward_batch(vf.spec, vf.params, observations)[:, 0]
    return raw * vf.target_std + vf.target_mean


def predict(vf: ValueFunction, obs) -> float:
    """
    Predict V for a single observation.

    :param vf:
    :param obs:
    :return:
    """
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 1 or obs.shape[0] != vf.observation_dim:
        raise InvalidInputError("Expected an observation of length {}, got shape {}.".format(
            vf.observation_dim, obs.shape
        ))
    return float(predict_batch(vf, obs)[0])


def _rescale_output_layer(vf: ValueFunction, new_mean: float, new_std: float) -> None:
    ratio = vf.target_std / new_std
    shift = (vf.target_mean - new_mean) / new_std
    if ratio == 1.0 and shift == 0.0:
        return
    values = vf.params.values.copy()
    w, b = vf.spec.unflatten(values)[-1]
    w *= ratio
    b *= ratio
    b += shift
    vf.params = MlpParams(FlatVector(values))


def _mse(vf: ValueFunction, observations: np.ndarray, standardized: np.ndarray) -> float:
    residual = forward_batch(vf.spec, vf.params, observations)[:, 0] - standardized
    return float(np.mean(residual ** 2))


def fit(vf: ValueFunction, observations, targets, rng: np.random.Generator) -> FitReport:
    """
    Regress V onto targets with shuffled minibatch gradient descent on the mean squared error.
    The reported errors are measured on the full set in standardized units.

    :param vf:
    :param observations:
    :param targets:
    :param rng:
    :return:
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.shape[0] == 0:
        raise InvalidInputError("Cannot fit the value function on empty data.")
    observations = _as_observations(vf, observations)
    if observations.shape[0] != targets.shape[0]:
        raise InvalidInputError("Observation and target counts differ.")
    check_finite("targets", targets)
    check_finite("observations", observations)

    new_mean = float(np.mean(targets))
    new_std = float(np.std(targets))
    if new_std < STD_FLOOR:
        new_std = 1.0
    _rescale_output_layer(vf, new_mean, new_std)
    vf.target_mean, vf.target_std = new_mean, new_std
    standardized = (targets - new_mean) / new_std

    cfg = vf.fit_config
    initial_mse = _mse(vf, observations, standardized)
    count = targets.shape[0]
    values = vf.params.values.copy()
    for epoch in range(cfg.epochs):
        order = rng.permutation(count)
        for start in range(0, count, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            params = MlpParams(FlatVector(values))
            residual = forward_batch(vf.spec, params, observations[idx])[:, 0] - standardized[idx]
            cotangent = (2.0 / idx.shape[0]) * residual[:, np.newaxis]
            grad, _ = backward_batch(vf.spec, params, observations[idx], cotangent)
            values -= cfg.learning_rate * grad.values
    vf.params = MlpParams(FlatVector(values))

    final_mse = _mse(vf, observations, standardized)
    log.debug("Value fit on {} samples: mse {:.4e} -> {:.4e}.".format(count, initial_mse, final_mse))
    return FitReport(initial_mse, final_mse)
