# -*- coding: utf-8 -*-

"""
Shared domain types: transitions, trajectories, demonstration sets, flat parameter
vectors and the sample batches consumed by the learners.

All learner arithmetic is carried out in float64. Every type in this module is
immutable after construction; arrays are stored read-only.
"""

import math
from typing import Sequence, Tuple, Optional

import attr
import numpy as np
from attr.validators import instance_of

from .exceptions import InvalidInputError
from .utilities import as_vector, as_frozen_array, check_finite


def _finite_scalar(instance, attribute, value):
    if not math.isfinite(value):
        raise InvalidInputError("'{}' must be finite (got {!r}).".format(attribute.name, value))


@attr.s(frozen=True, eq=False)
class Transition(object):
    """
    A single time step: the assembled policy input, the action taken, the reward received,
    the log-density of the action at collection time and the termination flag.
    """
    observation = attr.ib(converter=as_vector, repr=False)
    action = attr.ib(converter=as_vector, repr=False)
    reward = attr.ib(converter=float, validator=_finite_scalar)
    log_prob = attr.ib(converter=float, validator=_finite_scalar)
    done = attr.ib(default=False, converter=bool)


@attr.s(frozen=True, eq=False)
class Trajectory(object):
    """
    A time-ordered, non-empty sequence of transitions plus the observation that followed the last one.
    Only the last transition may carry done = True.
    """
    transitions = attr.ib(converter=tuple)
    terminal_observation = attr.ib(converter=as_vector, repr=False)

    @transitions.validator
    def _check_transitions(self, attribute, value):
        if len(value) == 0:
            raise InvalidInputError("A trajectory must contain at least one transition.")
        if not all(isinstance(t, Transition) for t in value):
            raise TypeError("'transitions' must only contain Transition instances.")
        obs_dim = value[0].observation.shape[0]
        act_dim = value[0].action.shape[0]
        for i, t in enumerate(value):
            if t.observation.shape[0] != obs_dim or t.action.shape[0] != act_dim:
                raise InvalidInputError("Transition {} changes the observation or action dimension.".format(i))
            if t.done and i != len(value) - 1:
                raise InvalidInputError("Only the final transition may be terminal (transition {}).".format(i))

    @classmethod
    def from_arrays(cls, observations, actions, rewards, log_probs, terminal_observation, done=False):
        """
        Create a Trajectory from stacked per-step arrays. The done flag applies to the final step.

        :param observations:
        :param actions:
        :param rewards:
        :param log_probs:
        :param terminal_observation:
        :param done:
        :return:
        """
        observations = np.atleast_2d(np.asarray(observations, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        rewards = np.asarray(rewards, dtype=np.float64).reshape(-1)
        log_probs = np.asarray(log_probs, dtype=np.float64).reshape(-1)
        length = rewards.shape[0]
        if not (observations.shape[0] == actions.shape[0] == log_probs.shape[0] == length):
            raise InvalidInputError("Per-step arrays must have equal length.")

        transitions = tuple(
            Transition(observations[t], actions[t], rewards[t], log_probs[t], done and t == length - 1)
            for t in range(length)
        )
        return cls(transitions, terminal_observation)

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    @property
    def done(self) -> bool:
        return self.transitions[-1].done

    @property
    def observation_dim(self) -> int:
        return self.transitions[0].observation.shape[0]

    @property
    def action_dim(self) -> int:
        return self.transitions[0].action.shape[0]

    @property
    def observations(self) -> np.ndarray:
        return np.stack([t.observation for t in self.transitions])

    @property
    def actions(self) -> np.ndarray:
        return np.stack([t.action for t in self.transitions])

    @property
    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions], dtype=np.float64)

    @property
    def log_probs(self) -> np.ndarray:
        return np.array([t.log_prob for t in self.transitions], dtype=np.float64)

    @property
    def undiscounted_return(self) -> float:
        return float(np.sum(self.rewards))


@attr.s(frozen=True, eq=False)
class DemoSet(object):
    """
    The demonstration dataset: expert trajectories in the assembled observation space.
    """
    trajectories = attr.ib(converter=tuple)
    source_tag = attr.ib(default="", validator=instance_of(str))

    @trajectories.validator
    def _check_trajectories(self, attribute, value):
        if not all(isinstance(t, Trajectory) for t in value):
            raise TypeError("'trajectories' must only contain Trajectory instances.")
        if value:
            obs_dim, act_dim = value[0].observation_dim, value[0].action_dim
            for i, t in enumerate(value):
                if t.observation_dim != obs_dim or t.action_dim != act_dim:
                    raise InvalidInputError("Demonstration {} is dimensionally inconsistent.".format(i))

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    @property
    def is_empty(self) -> bool:
        return len(self.trajectories) == 0

    @property
    def observation_dim(self) -> Optional[int]:
        return self.trajectories[0].observation_dim if self.trajectories else None

    @property
    def action_dim(self) -> Optional[int]:
        return self.trajectories[0].action_dim if self.trajectories else None

    @property
    def pair_count(self) -> int:
        return sum(len(t) for t in self.trajectories)

    @property
    def observations(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 0))
        return np.concatenate([t.observations for t in self.trajectories])

    @property
    def actions(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 0))
        return np.concatenate([t.actions for t in self.trajectories])


@attr.s(frozen=True, eq=False)
class FlatVector(object):
    """
    A contiguous float64 vector holding parameters, gradients or parameter steps.
    """
    values = attr.ib(converter=as_vector, repr=False)

    @classmethod
    def zeros(cls, dim: int) -> "FlatVector":
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.dim

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __repr__(self):
        return "FlatVector(dim={}, norm={:.3e})".format(self.dim, self.norm())

    def dot(self, other: "FlatVector") -> float:
        """
        Return the inner product with another vector of equal dimension.

        :param other:
        :return:
        """
        _check_same_dim(self, other)
        return float(np.dot(self.values, other.values))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def scale(self, alpha: float) -> "FlatVector":
        return FlatVector(alpha * self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _check_same_dim(x: FlatVector, y: FlatVector) -> None:
    if x.dim != y.dim:
        raise InvalidInputError("Dimension mismatch: {} != {}.".format(x.dim, y.dim))


def flat_axpy(alpha: float, x: FlatVector, y: FlatVector) -> FlatVector:
    """
    Return alpha * x + y.

    :param alpha:
    :param x:
    :param y:
    :return:
    """
    _check_same_dim(x, y)
    result = alpha * x.values + y.values
    check_finite("alpha * x + y", result)
    return FlatVector(result)


def discount_cumsum(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """
    Compute output[t] = rewards[t] + gamma * output[t + 1] backwards in time.

    :param rewards:
    :param gamma:
    :return:
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    running = 0.0
    for t in range(rewards.shape[0] - 1, -1, -1):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def discounted_return(trajectory: Trajectory, gamma: float) -> np.ndarray:
    """
    Return the Monte-Carlo discounted return-to-go for every step of the trajectory.

    :param trajectory:
    :param gamma:
    :return:
    """
    if trajectory is None or len(trajectory) == 0:
        raise InvalidInputError("The trajectory must not be empty.")
    if not 0.0 <= gamma < 1.0:
        raise InvalidInputError("gamma must lie in [0, 1), got {!r}.".format(gamma))
    return discount_cumsum(trajectory.rewards, gamma)


@attr.s(frozen=True, eq=False)
class SampleBatch(object):
    """
    Flat (observation, action[, advantage]) samples, stacked row-wise.
    """
    observations = attr.ib(converter=as_frozen_array, repr=False)
    actions = attr.ib(converter=as_frozen_array, repr=False)
    advantages = attr.ib(default=None, repr=False)

    def __attrs_post_init__(self):
        if self.observations.ndim != 2 or self.actions.ndim != 2:
            raise InvalidInputError("Observations and actions must be stacked as 2-D arrays.")
        if self.observations.shape[0] != self.actions.shape[0]:
            raise InvalidInputError("Observation and action counts differ.")
        if self.advantages is not None:
            advantages = as_vector(self.advantages)
            if advantages.shape[0] != self.observations.shape[0]:
                raise InvalidInputError("Advantage count differs from the sample count.")
            object.__setattr__(self, "advantages", advantages)

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory], advantages=None) -> "SampleBatch":
        """
        Stack the samples of several trajectories in order.

        :param trajectories:
        :param advantages:
        :return:
        """
        trajectories = list(trajectories)
        if not trajectories:
            raise InvalidInputError("At least one trajectory is required.")
        observations = np.concatenate([t.observations for t in trajectories])
        actions = np.concatenate([t.actions for t in trajectories])
        return cls(observations, actions, advantages)

    @classmethod
    def from_triples(cls, triples: Sequence[Tuple[Sequence[float], Sequence[float], float]]) -> "SampleBatch":
        """
        Build a batch from a list of (observation, action, advantage) triples.

        :param triples:
        :return:
        """
        triples = list(triples)
        if not triples:
            raise InvalidInputError("The batch must not be empty.")
        observations = np.stack([as_vector(o) for o, _, _ in triples])
        actions = np.stack([as_vector(a) for _, a, _ in triples])
        advantages = np.array([float(adv) for _, _, adv in triples])
        return cls(observations, actions, advantages)

    @classmethod
    def from_demos(cls, demos: DemoSet) -> "SampleBatch":
        return cls(demos.observations, demos.actions)

    def __len__(self):
        return self.observations.shape[0]

    def with_advantages(self, advantages) -> "SampleBatch":
        return SampleBatch(self.observations, self.actions, advantages)

    def scaled_advantages(self, c: float) -> "SampleBatch":
        return SampleBatch(self.observations, self.actions, c * self.advantages)
