# -*- coding: utf-8 -*-

"""Generalized advantage estimation and batch standardization."""

from typing import Sequence

import attr
import numpy as np

from .baseline import ValueFunction, predict_batch, predict
from .core import Trajectory
from .data_abstractions import DataModel
from .exceptions import InvalidInputError
from .utilities import in_range

STD_EPSILON = 1e-8


@attr.s(frozen=True)
class GaeConfig(DataModel):
    gamma = attr.ib(default=0.995, converter=float, validator=in_range(0.0, 1.0, high_inclusive=False))
    lam = attr.ib(default=0.97, converter=float, validator=in_range(0.0, 1.0))


def gae_from_values(rewards, values, bootstrap: float, gamma: float, lam: float) -> np.ndarray:
    """
    A_t = sum_l (gamma * lam)^l delta_{t+l}, with delta_t = r_t + gamma * V_{t+1} - V_t and V_T = bootstrap.

    :param rewards:
    :param values: value predictions for s_0 .. s_{T-1}
    :param bootstrap: value of the state following the last step
    :param gamma:
    :param lam:
    :return:
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape[0] == 0:
        raise InvalidInputError("Cannot estimate advantages of an empty trajectory.")
    if rewards.shape != values.shape:
        raise InvalidInputError("Rewards and values must have equal length.")

    next_values = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * next_values - values
    advantages = np.empty_like(deltas)
    running = 0.0
    for t in range(deltas.shape[0] - 1, -1, -1):
        running = deltas[t] + gamma * lam * running
        advantages[t] = running
    return advantages


def bootstrap_value(trajectory: Trajectory, vf: ValueFunction) -> float:
    """
    The value after the last step: zero on task termination, V(terminal observation) on truncation.

    :param trajectory:
    :param vf:
    :return:
    """
    if trajectory.done:
        return 0.0
    return predict(vf, trajectory.terminal_observation)


def gae(trajectory: Trajectory, vf: ValueFunction, cfg: GaeConfig) -> np.ndarray:
    """
    Generalized advantage estimates for every step of a trajectory.

    :param trajectory:
    :param vf:
    :param cfg:
    :return:
    """
    if trajectory is None or len(trajectory) == 0:
        raise InvalidInputError("Cannot estimate advantages of an empty trajectory.")
    values = predict_batch(vf, trajectory.observations)
    return gae_from_values(trajectory.rewards, values, bootstrap_value(trajectory, vf), cfg.gamma, cfg.lam)


def standardize(advantages) -> np.ndarray:
    """
    Shift and scale to zero mean and unit population standard deviation. A (numerically) constant
    input maps to zeros.

    :param advantages:
    :return:
    """
    advantages = np.asarray(advantages, dtype=np.float64).reshape(-1)
    if advantages.shape[0] < 2:
        raise InvalidInputError("Standardization needs at least two values.")
    std = np.std(advantages)
    if std < STD_EPSILON:
        return np.zeros_like(advantages)
    return (advantages - np.mean(advantages)) / std


def batch_advantages(trajectories: Sequence[Trajectory], vf: ValueFunction, cfg: GaeConfig,
                     standardized: bool = True) -> np.ndarray:
    """
    Per-trajectory GAE, concatenated in trajectory order and optionally standardized over the whole batch.
    A batch with a single sample is returned unstandardized.

    :param trajectories:
    :param vf:
    :param cfg:
    :param standardized:
    :return:
    """
    advantages = np.concatenate([gae(t, vf, cfg) for t in trajectories])
    if standardized and advantages.shape[0] >= 2:
        advantages = standardize(advantages)
    return advantages
