# -*- coding: utf-8 -*-

"""
The diagonal-Gaussian policy: an MLP mean with a state-independent log standard deviation.

theta = concat(mean-network parameters, log_std). Actions are not squashed; the
environments clip them.
"""

import math
from typing import Tuple, Sequence

import attr
import numpy as np
from attr.validators import instance_of

from .core import FlatVector
from .exceptions import InvalidInputError
from .nnet import MlpSpec, MlpParams, Linearization, forward_batch
from .utilities import as_vector, check_finite

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


def _clamped_log_std(value) -> np.ndarray:
    return as_vector(np.clip(np.asarray(value, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX))


@attr.s(frozen=True)
class GaussianPolicy(object):
    spec = attr.ib(validator=instance_of(MlpSpec))
    mean_params = attr.ib(validator=instance_of(MlpParams))
    log_std = attr.ib(converter=_clamped_log_std, repr=False, eq=False)

    def __attrs_post_init__(self):
        if self.mean_params.flat.dim != self.spec.parameter_count:
            raise InvalidInputError("Mean parameters do not match the network spec.")
        if self.log_std.shape[0] != self.spec.output_dim:
            raise InvalidInputError("log_std must have one entry per action dimension.")

    @classmethod
    def create(cls, observation_dim: int, action_dim: int, hidden_sizes: Sequence[int] = (256, 256),
               seed: int = 0, init_log_std: float = 0.0) -> "GaussianPolicy":
        """
        Create a freshly initialized policy.

        :param observation_dim:
        :param action_dim:
        :param hidden_sizes:
        :param seed:
        :param init_log_std:
        :return:
        """
        spec = MlpSpec(observation_dim, hidden_sizes, action_dim)
        return cls(spec, MlpParams.initialize(spec, seed), np.full(action_dim, init_log_std))

    @property
    def observation_dim(self) -> int:
        return self.spec.input_dim

    @property
    def action_dim(self) -> int:
        return self.spec.output_dim

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def theta(self) -> FlatVector:
        return FlatVector(np.concatenate((self.mean_params.values, self.log_std)))

    @property
    def theta_dim(self) -> int:
        return self.spec.parameter_count + self.action_dim

    def with_theta(self, theta: FlatVector) -> "GaussianPolicy":
        """
        Return a policy with the given parameters; log_std is clamped to [LOG_STD_MIN, LOG_STD_MAX].

        :param theta:
        :return:
        """
        if theta.dim != self.theta_dim:
            raise InvalidInputError("theta must have {} entries, got {}.".format(self.theta_dim, theta.dim))
        split = self.spec.parameter_count
        return GaussianPolicy(self.spec, MlpParams(FlatVector(theta.values[:split])), theta.values[split:])

    def with_mean_params(self, mean_params: MlpParams) -> "GaussianPolicy":
        return GaussianPolicy(self.spec, mean_params, self.log_std)

    def mean(self, obs) -> np.ndarray:
        return self.mean_batch(_as_obs(self, obs)[np.newaxis, :])[0]

    def mean_batch(self, observations) -> np.ndarray:
        return forward_batch(self.spec, self.mean_params, observations)


def _as_obs(policy: GaussianPolicy, obs) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 1 or obs.shape[0] != policy.observation_dim:
        raise InvalidInputError("Expected an observation of length {}, got shape {}.".format(
            policy.observation_dim, obs.shape
        ))
    check_finite("obs", obs)
    return obs


def _as_action(policy: GaussianPolicy, action) -> np.ndarray:
    action = np.asarray(action, dtype=np.float64)
    if action.ndim != 1 or action.shape[0] != policy.action_dim:
        raise InvalidInputError("Expected an action of length {}, got shape {}.".format(
            policy.action_dim, action.shape
        ))
    check_finite("action", action)
    return action


def _as_pairs(policy: GaussianPolicy, observations, actions) -> Tuple[np.ndarray, np.ndarray]:
    observations = np.asarray(observations, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if observations.ndim != 2 or observations.shape[1] != policy.observation_dim:
        raise InvalidInputError("Observations must have shape (N, {}).".format(policy.observation_dim))
    if actions.ndim != 2 or actions.shape[1] != policy.action_dim:
        raise InvalidInputError("Actions must have shape (N, {}).".format(policy.action_dim))
    if observations.shape[0] != actions.shape[0]:
        raise InvalidInputError("Observation and action counts differ.")
    check_finite("observations", observations)
    check_finite("actions", actions)
    return observations, actions


def log_prob_batch(policy: GaussianPolicy, observations, actions) -> np.ndarray:
    """
    Log-density of every (observation, action) row.

    :param policy:
    :param observations:
    :param actions:
    :return:
    """
    observations, actions = _as_pairs(policy, observations, actions)
    z = (actions - policy.mean_batch(observations)) / policy.std
    return -0.5 * np.sum(z ** 2, axis=1) - np.sum(policy.log_std) - 0.5 * policy.action_dim * LOG_2PI


def log_prob(policy: GaussianPolicy, obs, action) -> float:
    """
    Return log pi(action | obs) = -sum_j [(a_j - mu_j)^2 / (2 sigma_j^2) + log sigma_j] - (m / 2) log 2 pi.

    :param policy:
    :param obs:
    :param action:
    :return:
    """
    obs = _as_obs(policy, obs)
    action = _as_action(policy, action)
    return float(log_prob_batch(policy, obs[np.newaxis, :], action[np.newaxis, :])[0])


def act(policy: GaussianPolicy, obs, rng: np.random.Generator, deterministic: bool = False) -> Tuple[np.ndarray, float]:
    """
    Sample an action (or return the mean if deterministic) together with its log-density.

    :param policy:
    :param obs:
    :param rng:
    :param deterministic:
    :return:
    """
    obs = _as_obs(policy, obs)
    mean = policy.mean(obs)
    if deterministic:
        action = mean
    else:
        action = mean + policy.std * rng.standard_normal(policy.action_dim)
    return action, log_prob(policy, obs, action)


@attr.s(frozen=True, eq=False)
class BatchScores(object):
    """
    The score vectors grad_theta log pi(a_t | s_t) of a fixed sample set, kept implicitly:
    one forward pass, the per-sample mean coefficients (a_t - mu_t) / sigma^2 and the log_std
    components (a_t - mu_t)^2 / sigma^2 - 1. Products with the score matrix reuse them.
    """
    policy = attr.ib(validator=instance_of(GaussianPolicy))
    linearization = attr.ib(validator=instance_of(Linearization), repr=False)
    mean_scale = attr.ib(repr=False)
    log_std_scores = attr.ib(repr=False)

    @classmethod
    def create(cls, policy: GaussianPolicy, observations, actions) -> "BatchScores":
        observations, actions = _as_pairs(policy, observations, actions)
        linearization = Linearization.create(policy.spec, policy.mean_params, observations)
        var = policy.std ** 2
        residual = actions - linearization.outputs
        return cls(policy, linearization, residual / var, residual ** 2 / var - 1.0)

    def __len__(self):
        return self.linearization.rows

    def weighted_sum(self, weights) -> FlatVector:
        """
        Return sum_t weights[t] * u_t.

        :param weights:
        :return:
        """
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != len(self):
            raise InvalidInputError("Expected one weight per sample.")
        mean_grad, _ = self.linearization.vjp(weights[:, np.newaxis] * self.mean_scale)
        return FlatVector(np.concatenate((mean_grad.values, weights @ self.log_std_scores)))

    def dot(self, v: FlatVector) -> np.ndarray:
        """
        Return u_t^T v for every sample t.

        :param v:
        :return:
        """
        if v.dim != self.policy.theta_dim:
            raise InvalidInputError("v must have {} entries, got {}.".format(self.policy.theta_dim, v.dim))
        split = self.policy.spec.parameter_count
        d_mean = self.linearization.jvp(FlatVector(v.values[:split]))
        return np.sum(self.mean_scale * d_mean, axis=1) + self.log_std_scores @ v.values[split:]


def score_weighted_sum(policy: GaussianPolicy, observations, actions, weights) -> FlatVector:
    """
    Return sum_t weights[t] * grad_theta log pi(actions[t] | observations[t]).

    :param policy:
    :param observations:
    :param actions:
    :param weights:
    :return:
    """
    return BatchScores.create(policy, observations, actions).weighted_sum(weights)


def score_dot(policy: GaussianPolicy, observations, actions, v: FlatVector) -> np.ndarray:
    """
    Return (grad_theta log pi(actions[t] | observations[t]))^T v for every sample t.

    :param policy:
    :param observations:
    :param actions:
    :param v:
    :return:
    """
    return BatchScores.create(policy, observations, actions).dot(v)


def grad_log_prob(policy: GaussianPolicy, obs, action) -> FlatVector:
    """
    Return the score vector grad_theta log pi(action | obs).

    :param policy:
    :param obs:
    :param action:
    :return:
    """
    obs = _as_obs(policy, obs)
    action = _as_action(policy, action)
    return score_weighted_sum(policy, obs[np.newaxis, :], action[np.newaxis, :], np.ones(1))
