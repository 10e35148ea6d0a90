# -*- coding: utf-8 -*-

"""
Built-in continuous-control tasks: a 2-D point-mass reacher and a pendulum swing-up.
Both render to small grayscale pixel grids with optional visual distractors and come
with a privileged scripted expert for demonstration generation.
"""

import enum
import logging
import math
from typing import Tuple, Optional, Dict, Any

import attr
import numpy as np
from attr.validators import instance_of

from .data_abstractions import DataModel
from .exceptions import InvalidInputError, ProtocolError
from .utilities import camelcase_to_underscore, as_vector, check_finite, positive

log = logging.getLogger(__name__)


class ObservationMode(enum.Enum):
    State = "state"
    Pixels = "pixels"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        elif isinstance(value, str):
            try:
                return cls(value.lower())
            except ValueError:
                raise ValueError("Observation mode '{}' is not known.".format(value))
        else:
            raise ValueError("Observation mode '{}' is not known.".format(value))


class RewardMode(enum.Enum):
    Sparse = "sparse"
    Dense = "dense"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        elif isinstance(value, str):
            try:
                return cls(value.lower())
            except ValueError:
                raise ValueError("Reward mode '{}' is not known.".format(value))
        else:
            raise ValueError("Reward mode '{}' is not known.".format(value))


class Distractor(enum.Enum):
    Clean = "none"
    BrightnessShift = "brightness_shift"
    LightGradient = "light_gradient"
    ObjectRecolor = "object_recolor"
    ClutterBlob = "clutter_blob"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        elif isinstance(value, str):
            try:
                return cls(value.strip().lower())
            except ValueError:
                raise ValueError("Distractor '{}' is not known.".format(value))
        else:
            raise ValueError("Distractor '{}' is not known.".format(value))


def as_distractors(value) -> Tuple[Distractor, ...]:
    """
    Convert a mode name, a comma-separated list of names or an iterable of modes into a
    tuple of active distractors ('none' contributes nothing).

    :param value:
    :return:
    """
    if value is None:
        return tuple()
    if isinstance(value, (str, Distractor)):
        value = value.split(",") if isinstance(value, str) else (value, )
    modes = list()
    for v in value:
        if isinstance(v, str) and not v.strip():
            continue
        mode = Distractor.coerce(v)
        if mode is not Distractor.Clean and mode not in modes:
            modes.append(mode)
    return tuple(modes)


def as_range_pair(value) -> Tuple[float, float]:
    low, high = (float(v) for v in value)
    if low > high:
        raise ValueError("The range ({}, {}) is empty.".format(low, high))
    return low, high


def as_floats(value) -> Tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value), )
    return tuple(float(v) for v in value)


@attr.s(frozen=True)
class DistractorConfig(DataModel):
    """
    Active visual distractors and the ranges their per-episode parameters are drawn from.
    Distractors alter pixels only.
    """
    modes = attr.ib(default=attr.Factory(tuple), converter=as_distractors)
    brightness_range = attr.ib(default=(-0.3, 0.3), converter=as_range_pair)
    gradient_range = attr.ib(default=(0.2, 0.6), converter=as_range_pair)
    recolor_range = attr.ib(default=(0.3, 1.0), converter=as_range_pair)
    blob_radius_range = attr.ib(default=(2.0, 5.0), converter=as_range_pair)
    blob_intensity_range = attr.ib(default=(0.4, 0.9), converter=as_range_pair)

    def with_modes(self, modes) -> "DistractorConfig":
        return attr.evolve(self, modes=modes)

    def __contains__(self, mode):
        return Distractor.coerce(mode) in self.modes


@attr.s(frozen=True)
class EnvSpec(DataModel):
    id = attr.ib(default="point_reacher", validator=instance_of(str))
    observation_mode = attr.ib(default=ObservationMode.State, converter=ObservationMode.coerce)
    reward_mode = attr.ib(default=RewardMode.Dense, converter=RewardMode.coerce)
    horizon = attr.ib(default=100, converter=int, validator=positive)
    dt = attr.ib(default=0.05, converter=float, validator=positive)
    action_low = attr.ib(default=(-1.0, -1.0), converter=as_floats)
    action_high = attr.ib(default=(1.0, 1.0), converter=as_floats)
    pixel_size = attr.ib(default=32, converter=int, validator=positive)
    distractors = attr.ib(default=attr.Factory(DistractorConfig), validator=instance_of(DistractorConfig))
    seed = attr.ib(default=0, converter=int)

    @id.validator
    def _check_id(self, attribute, value):
        if value not in EnvironmentMeta.classes:
            raise ValueError("Environment '{}' is not known (choose from {}).".format(
                value, ", ".join(sorted(EnvironmentMeta.classes))
            ))

    @classmethod
    def for_env(cls, env_id: str, **kwargs) -> "EnvSpec":
        """
        Create a spec that carries the documented defaults of the given environment.

        :param env_id:
        :param kwargs: overrides
        :return:
        """
        if env_id not in EnvironmentMeta.classes:
            raise ValueError("Environment '{}' is not known.".format(env_id))
        env_cls = EnvironmentMeta.classes[env_id]
        defaults = dict(
            id=env_id,
            horizon=env_cls.default_horizon,
            action_low=(-env_cls.default_action_bound, ) * env_cls.action_dim,
            action_high=(env_cls.default_action_bound, ) * env_cls.action_dim,
        )
        defaults.update(kwargs)
        return cls(**defaults)

    @property
    def is_pixels(self) -> bool:
        return self.observation_mode is ObservationMode.Pixels


@attr.s(frozen=True, eq=False)
class StepResult(object):
    """
    What the agent receives after reset or step. 'state' is the privileged ground truth
    (experts only); 'proprio' never contains goal information.
    """
    raw_observation = attr.ib(converter=np.asarray, repr=False)
    proprio = attr.ib(converter=as_vector, repr=False)
    state = attr.ib(converter=as_vector, repr=False)
    reward = attr.ib(default=0.0, converter=float)
    done = attr.ib(default=False, converter=bool)
    info = attr.ib(default=attr.Factory(dict), validator=instance_of(dict))
    frame_key = attr.ib(default="", validator=instance_of(str))


def frame_key(episode: int, step: int) -> str:
    return "{}:{}".format(episode, step)


class EnvironmentMeta(type):
    """
    EnvironmentMeta registers all Environments in EnvironmentMeta.classes
    """
    classes = dict()

    def __new__(meta, name, bases, cls_dict):
        register = cls_dict.pop("register", True)
        cls = super(EnvironmentMeta, meta).__new__(meta, name, bases, cls_dict)
        if register:
            EnvironmentMeta.classes[camelcase_to_underscore(cls.__name__)] = cls

        return cls


@attr.s
class Environment(object, metaclass=EnvironmentMeta):
    """
    The episodic environment protocol: reset, then step until done (the horizon is reached).
    Randomness for the physical start state and for the visual distractor parameters comes
    from two independent streams spawned at every reset.
    """
    register = False

    state_dim = 0
    proprio_dim = 0
    action_dim = 0
    default_horizon = 100
    default_action_bound = 1.0
    arena_extent = 1.0

    spec = attr.ib(validator=instance_of(EnvSpec))
    _state = attr.ib(default=None, repr=False)
    _t = attr.ib(default=0, validator=instance_of(int))
    _episode = attr.ib(default=-1, validator=instance_of(int))
    _ended = attr.ib(default=False, validator=instance_of(bool))
    _visuals = attr.ib(default=attr.Factory(dict), repr=False)
    _rng = attr.ib(default=None, repr=False)
    _log = attr.ib(default=None, repr=False)

    def __attrs_post_init__(self):
        if self._log is None:
            self._log = logging.getLogger("{}.{}".format(__name__, self.__class__.__name__))
        if len(self.spec.action_low) != self.action_dim or len(self.spec.action_high) != self.action_dim:
            raise InvalidInputError("'{}' expects {} action bounds per side.".format(self.spec.id, self.action_dim))

    @property
    def observation_shape(self) -> Tuple[int, ...]:
        if self.spec.is_pixels:
            return self.spec.pixel_size, self.spec.pixel_size
        return self.state_dim,

    @property
    def t(self) -> int:
        return self._t

    @property
    def episode(self) -> int:
        return self._episode

    @property
    def state(self) -> np.ndarray:
        return as_vector(self._state)

    @property
    def visuals(self) -> Dict[str, Any]:
        return dict(self._visuals)

    def reset(self, rng: Optional[np.random.Generator] = None, episode: Optional[int] = None) -> StepResult:
        """
        Start a new episode. Draws one seed from rng and spawns separate streams for the
        dynamics and for the distractor parameters.

        :param rng: if None, a generator seeded with spec.seed is used on first reset
        :param episode: the episode id used for frame keys (defaults to a running counter)
        :return:
        """
        if rng is None:
            if self._rng is None:
                self._rng = np.random.default_rng(self.spec.seed)
            rng = self._rng
        dynamics_seq, visual_seq = np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(2)
        self._state = self._initial_state(np.random.default_rng(dynamics_seq))
        self._visuals = self._draw_visuals(np.random.default_rng(visual_seq))
        self._episode = self._episode + 1 if episode is None else int(episode)
        self._t = 0
        self._ended = False
        return self._result(0.0)

    def step(self, action) -> StepResult:
        """
        Clip the action to the bounds and advance the dynamics by one time step.

        :param action:
        :return:
        """
        if self._state is None:
            raise ProtocolError("The environment must be reset before stepping.")
        if self._ended:
            raise ProtocolError("Episode {} has ended; reset the environment first.".format(self._episode))
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.action_dim:
            raise InvalidInputError("Expected an action of length {}, got {}.".format(self.action_dim, action.shape))
        check_finite("action", action)
        action = np.clip(action, self.spec.action_low, self.spec.action_high)

        self._state = self._integrate(self._state, action, self.spec.dt)
        self._t += 1
        if self.spec.reward_mode is RewardMode.Sparse:
            reward = 1.0 if self.success() else 0.0
        else:
            reward = self.dense_reward()
        self._ended = self._t >= self.spec.horizon
        return self._result(reward)

    def _result(self, reward: float) -> StepResult:
        info = {
            "distance_to_goal": self.distance_to_goal(),
            "success": self.success(),
            "truncated": self._ended,
        }
        raw = self.render() if self.spec.is_pixels else self.state_observation()
        return StepResult(raw, self.proprio(), self._state, reward, self._ended, info,
                          frame_key(self._episode, self._t))

    def _draw_visuals(self, rng: np.random.Generator) -> Dict[str, Any]:
        # All parameters are drawn whatever the active modes, so switching a mode on or off
        # never changes the others.
        d = self.spec.distractors
        n = self.spec.pixel_size
        return {
            "brightness": rng.uniform(*d.brightness_range),
            "gradient_angle": rng.uniform(0.0, 2.0 * math.pi),
            "gradient_strength": rng.uniform(*d.gradient_range),
            "tints": rng.uniform(*d.recolor_range, size=2),
            "blob_center": rng.uniform(0.0, n, size=2),
            "blob_radius": rng.uniform(*d.blob_radius_range),
            "blob_intensity": rng.uniform(*d.blob_intensity_range),
        }

    def _to_pixels(self, x: float, y: float) -> Tuple[float, float]:
        """
        Map arena coordinates to continuous (row, col) pixel coordinates; row 0 is the top edge.
        """
        n = self.spec.pixel_size
        e = self.arena_extent
        return (e - y) / (2.0 * e) * n, (x + e) / (2.0 * e) * n

    def _coverage(self, row: float, col: float, radius: float) -> np.ndarray:
        centers = np.arange(self.spec.pixel_size) + 0.5
        d = np.hypot(centers[:, np.newaxis] - row, centers[np.newaxis, :] - col)
        return np.clip(radius + 0.5 - d, 0.0, 1.0)

    def render(self) -> np.ndarray:
        """
        Draw the scene as an N x N grayscale grid in [0, 1]: anti-aliased discs for every glyph,
        then the active distractors (recolor, clutter blob, light gradient, brightness shift).

        :return:
        """
        if self._state is None:
            raise ProtocolError("The environment must be reset before rendering.")
        modes = self.spec.distractors.modes
        v = self._visuals
        frame = np.zeros((self.spec.pixel_size, self.spec.pixel_size))
        for x, y, radius, intensity, tint_index in self._glyphs():
            if Distractor.ObjectRecolor in modes:
                intensity = intensity * v["tints"][tint_index]
            row, col = self._to_pixels(x, y)
            frame = np.maximum(frame, intensity * self._coverage(row, col, radius))

        if Distractor.ClutterBlob in modes:
            col, row = v["blob_center"]
            frame = np.maximum(frame, v["blob_intensity"] * self._coverage(row, col, v["blob_radius"]))

        if Distractor.LightGradient in modes:
            n = self.spec.pixel_size
            centers = (np.arange(n) + 0.5) / n - 0.5
            ramp = (math.cos(v["gradient_angle"]) * centers[np.newaxis, :] +
                    math.sin(v["gradient_angle"]) * centers[:, np.newaxis])
            frame = frame + v["gradient_strength"] * ramp

        if Distractor.BrightnessShift in modes:
            frame = frame + v["brightness"]

        return np.clip(frame, 0.0, 1.0)

    def blob_bounding_box(self) -> Tuple[int, int, int, int]:
        """
        Return (row_start, row_stop, col_start, col_stop) enclosing every pixel the clutter blob can touch.

        :return:
        """
        n = self.spec.pixel_size
        col, row = self._visuals["blob_center"]
        r = self._visuals["blob_radius"]
        return (max(0, int(math.floor(row - r - 1.0))), min(n, int(math.ceil(row + r)) + 1),
                max(0, int(math.floor(col - r - 1.0))), min(n, int(math.ceil(col + r)) + 1))

    def expert_action(self) -> np.ndarray:
        return self.scripted_expert(self._state)

    @classmethod
    def scripted_expert(cls, state) -> np.ndarray:
        raise NotImplementedError()

    def _initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError()

    def _integrate(self, state: np.ndarray, action: np.ndarray, dt: float) -> np.ndarray:
        raise NotImplementedError()

    def _glyphs(self):
        raise NotImplementedError()

    def state_observation(self) -> np.ndarray:
        raise NotImplementedError()

    def proprio(self) -> np.ndarray:
        raise NotImplementedError()

    def success(self) -> bool:
        raise NotImplementedError()

    def dense_reward(self) -> float:
        raise NotImplementedError()

    def distance_to_goal(self) -> float:
        raise NotImplementedError()


@attr.s
class PointReacher(Environment):
    """
    A point mass in the arena [-1, 1]^2 driven by a bounded 2-D acceleration against linear
    friction; walls reflect. The state is (x, y, vx, vy, gx, gy).
    """
    state_dim = 6
    proprio_dim = 4
    action_dim = 2
    default_horizon = 100
    default_action_bound = 1.0
    arena_extent = 1.0

    friction = 0.5
    success_radius = 0.05
    spawn_extent = 0.8
    glyph_radius = 1.5
    kp = 4.0
    kd = 2.5

    def _initial_state(self, rng):
        position = rng.uniform(-self.spawn_extent, self.spawn_extent, size=2)
        goal = rng.uniform(-self.spawn_extent, self.spawn_extent, size=2)
        return np.concatenate((position, np.zeros(2), goal))

    def _integrate(self, state, action, dt):
        return reacher_dynamics(state, action, dt, self.friction, self.arena_extent)

    def _glyphs(self):
        x, y, _, _, gx, gy = self._state
        return (
            (gx, gy, self.glyph_radius, 0.5, 1),
            (x, y, self.glyph_radius, 1.0, 0),
        )

    def state_observation(self):
        return as_vector(self._state)

    def proprio(self):
        return as_vector(self._state[:4])

    def distance_to_goal(self):
        return float(np.linalg.norm(self._state[:2] - self._state[4:6]))

    def success(self):
        return self.distance_to_goal() < self.success_radius

    def dense_reward(self):
        return -self.distance_to_goal()

    @classmethod
    def scripted_expert(cls, state) -> np.ndarray:
        """
        PD control toward the goal: a = Kp (goal - pos) - Kd v, clipped to the action bounds.

        :param state:
        :return:
        """
        state = np.asarray(state, dtype=np.float64)
        action = cls.kp * (state[4:6] - state[0:2]) - cls.kd * state[2:4]
        return np.clip(action, -cls.default_action_bound, cls.default_action_bound)


def reacher_dynamics(state: np.ndarray, action: np.ndarray, dt: float, friction: float, extent: float) -> np.ndarray:
    """
    One explicit Euler step x <- x + dt v, v <- v + dt (a - friction v), followed by wall reflection.

    :param state:
    :param action:
    :param dt:
    :param friction:
    :param extent:
    :return:
    """
    state = np.array(state, dtype=np.float64)
    position, velocity = state[0:2], state[2:4]
    new_position = position + dt * velocity
    new_velocity = velocity + dt * (action - friction * velocity)
    for i in range(2):
        if new_position[i] > extent:
            new_position[i] = 2.0 * extent - new_position[i]
            new_velocity[i] = -new_velocity[i]
        elif new_position[i] < -extent:
            new_position[i] = -2.0 * extent - new_position[i]
            new_velocity[i] = -new_velocity[i]
    state[0:2] = new_position
    state[2:4] = new_velocity
    return state


def wrap_angle(theta: float) -> float:
    """
    Wrap an angle to [-pi, pi).
    """
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


@attr.s
class Pendulum(Environment):
    """
    A torque-limited pendulum (m = l = 1, g = 9.8) started hanging down. The angle is measured
    from upright; the state is (theta, theta_dot).
    """
    state_dim = 3
    proprio_dim = 3
    action_dim = 1
    default_horizon = 200
    default_action_bound = 2.0
    arena_extent = 1.2

    gravity = 9.8
    start_jitter = 0.1
    success_angle = 0.15
    success_velocity = 1.0

    # Scripted swing-up and balance
    energy_gain = 5.0
    energy_margin = 0.05
    kick_velocity = 0.05
    catch_angle = 0.3
    catch_gain = 10.0

    def _initial_state(self, rng):
        theta = wrap_angle(math.pi + rng.uniform(-self.start_jitter, self.start_jitter))
        theta_dot = rng.uniform(-self.start_jitter, self.start_jitter)
        return np.array([theta, theta_dot])

    def _integrate(self, state, action, dt):
        return pendulum_dynamics(state, action, dt, self.gravity)

    def _glyphs(self):
        theta = self._state[0]
        tip_x, tip_y = math.sin(theta), math.cos(theta)
        glyphs = [(0.0, 0.0, 1.0, 0.5, 1)]
        for f in (0.25, 0.5, 0.75):
            glyphs.append((f * tip_x, f * tip_y, 0.8, 0.5, 1))
        glyphs.append((tip_x, tip_y, 2.0, 1.0, 0))
        return tuple(glyphs)

    def state_observation(self):
        theta, theta_dot = self._state
        return as_vector((math.cos(theta), math.sin(theta), theta_dot))

    def proprio(self):
        return self.state_observation()

    def distance_to_goal(self):
        return abs(wrap_angle(self._state[0]))

    def success(self):
        return self.distance_to_goal() < self.success_angle and abs(self._state[1]) < self.success_velocity

    def dense_reward(self):
        theta, theta_dot = self._state
        return math.cos(theta) - 0.01 * theta_dot ** 2

    @classmethod
    def scripted_expert(cls, state) -> np.ndarray:
        """
        Energy-shaping swing-up, u = k theta_dot (E_d - E) with E = theta_dot^2 / 2 + g cos(theta),
        and a balancing controller once the pole is close to upright.

        :param state:
        :return:
        """
        theta, theta_dot = float(state[0]), float(state[1])
        theta = wrap_angle(theta)
        bound = cls.default_action_bound
        if abs(theta) < cls.catch_angle:
            # Drive the unstable mode theta_dot + sqrt(g) theta to zero.
            u = -cls.catch_gain * (theta_dot + math.sqrt(cls.gravity) * theta)
        elif abs(theta_dot) < cls.kick_velocity:
            u = bound
        else:
            energy = 0.5 * theta_dot ** 2 + cls.gravity * math.cos(theta)
            target = cls.gravity + cls.energy_margin
            u = cls.energy_gain * theta_dot * (target - energy)
        return np.array([min(bound, max(-bound, u))])


def pendulum_dynamics(state: np.ndarray, action: np.ndarray, dt: float, gravity: float) -> np.ndarray:
    """
    One semi-implicit Euler step of theta_ddot = g sin(theta) + u (theta measured from upright).

    :param state:
    :param action:
    :param dt:
    :param gravity:
    :return:
    """
    theta, theta_dot = float(state[0]), float(state[1])
    theta_dot = theta_dot + dt * (gravity * math.sin(theta) + float(action[0]))
    theta = wrap_angle(theta + dt * theta_dot)
    return np.array([theta, theta_dot])


def make_env(spec: EnvSpec) -> Environment:
    """
    Create the environment registered under spec.id.

    :param spec:
    :return:
    """
    try:
        env_cls = EnvironmentMeta.classes[spec.id]
    except KeyError:
        raise InvalidInputError("Environment '{}' is not known.".format(spec.id))
    return env_cls(spec)


def scripted_expert(env_id: str, env_state) -> np.ndarray:
    """
    The privileged expert action for the ground-truth state of the named environment.

    :param env_id:
    :param env_state:
    :return:
    """
    try:
        env_cls = EnvironmentMeta.classes[env_id]
    except KeyError:
        raise InvalidInputError("Environment '{}' is not known.".format(env_id))
    return env_cls.scripted_expert(env_state)


def action_dim(spec: EnvSpec) -> int:
    return EnvironmentMeta.classes[spec.id].action_dim


def proprio_dim(spec: EnvSpec) -> int:
    return EnvironmentMeta.classes[spec.id].proprio_dim
