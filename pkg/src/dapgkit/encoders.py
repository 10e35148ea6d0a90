# -*- coding: utf-8 -*-

"""
Frozen observation encoders h = f(I) and the assembly of the policy input [h, proprio].

Every encoder is immutable once constructed and encode() is a pure function of the raw
observation. Each encoder class registers itself under its snake-case name.
"""

import logging
import math
import time
from typing import Tuple, Optional

import attr
import numpy as np
from attr.validators import instance_of

from .data_abstractions import DataModel
from .envs import EnvSpec, StepResult, make_env, proprio_dim
from .exceptions import InvalidInputError, MissingFeatureError
from .parsers import FeatureTableParser
from .utilities import camelcase_to_underscore, as_vector, as_frozen_array, as_sizes, check_finite, \
    digest_arrays, positive, non_negative

log = logging.getLogger(__name__)

STD_FLOOR = 1e-6
CALIBRATION_MIXES = ("random", "mixed")


@attr.s(frozen=True)
class EncoderSpec(DataModel):
    kind = attr.ib(default="identity", validator=instance_of(str))
    feature_dim = attr.ib(default=512, converter=int, validator=positive)
    include_proprio = attr.ib(default=False, converter=attr.converters.to_bool)
    proprio_noise = attr.ib(default=0.0, converter=float, validator=non_negative)
    pool_factor = attr.ib(default=4, converter=int, validator=positive)
    calibration_frames = attr.ib(default=1000, converter=int, validator=positive)
    calibration_mix = attr.ib(default="random", validator=attr.validators.in_(CALIBRATION_MIXES))
    feature_table = attr.ib(default="", validator=instance_of(str))

    @kind.validator
    def _check_kind(self, attribute, value):
        if value not in EncoderMeta.classes:
            raise ValueError("Encoder '{}' is not known (choose from {}).".format(
                value, ", ".join(sorted(EncoderMeta.classes))
            ))


@attr.s
class LatencyMeter(object):
    """
    Accumulates the wall-clock time spent in encode calls.
    """
    calls = attr.ib(default=0, validator=instance_of(int))
    total_s = attr.ib(default=0.0, validator=instance_of(float))

    def record(self, seconds: float) -> None:
        self.calls += 1
        self.total_s += float(seconds)

    def merge(self, other: "LatencyMeter") -> None:
        self.calls += other.calls
        self.total_s += other.total_s

    @property
    def mean_s(self) -> float:
        return self.total_s / self.calls if self.calls > 0 else 0.0


class EncoderMeta(type):
    """
    EncoderMeta registers all FrozenEncoders in EncoderMeta.classes
    """
    classes = dict()

    def __new__(meta, name, bases, cls_dict):
        register = cls_dict.pop("register", True)
        cls = super(EncoderMeta, meta).__new__(meta, name, bases, cls_dict)
        if register:
            EncoderMeta.classes[camelcase_to_underscore(cls.__name__)] = cls

        return cls


class FrozenEncoder(object, metaclass=EncoderMeta):
    """
    The encoder interface. 'validity' documents the observation distribution the encoder
    is meant for.
    """
    register = False

    validity = ""

    @property
    def feature_dim(self) -> int:
        raise NotImplementedError()

    @classmethod
    def from_spec(cls, spec: EncoderSpec, env_spec: EnvSpec, seed: int) -> "FrozenEncoder":
        raise NotImplementedError()

    def select(self, step: StepResult):
        """
        Pick the encoder input out of a step result.

        :param step:
        :return:
        """
        return step.raw_observation

    def encode(self, raw) -> np.ndarray:
        raise NotImplementedError()

    def digest(self) -> str:
        raise NotImplementedError()


def _as_raw(raw, shape: Tuple[int, ...]) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != tuple(shape):
        raise InvalidInputError("Expected a raw observation of shape {}, got {}.".format(tuple(shape), raw.shape))
    check_finite("raw observation", raw)
    return raw


@attr.s(frozen=True, eq=False)
class Identity(FrozenEncoder):
    validity = "low-dimensional state vectors of the configured environment"

    input_dim = attr.ib(converter=int, validator=positive)

    @property
    def feature_dim(self) -> int:
        return self.input_dim

    @classmethod
    def from_spec(cls, spec, env_spec, seed):
        shape = make_env(env_spec).observation_shape
        if len(shape) != 1:
            raise InvalidInputError("The identity encoder needs state observations.")
        return cls(shape[0])

    def encode(self, raw) -> np.ndarray:
        return as_vector(_as_raw(raw, (self.input_dim, )))

    def digest(self) -> str:
        return digest_arrays(tag="identity:{}".format(self.input_dim))


@attr.s(frozen=True, eq=False)
class RandomProjection(FrozenEncoder):
    """
    h = (W flatten(I) - mu) / sigma with a fixed Gaussian matrix W (entries N(0, 1/d_in)) and
    per-feature statistics measured once on a calibration set.
    """
    validity = "observations resembling the calibration frames"

    seed = attr.ib(converter=int)
    input_shape = attr.ib(converter=as_sizes)
    weights = attr.ib(converter=as_frozen_array, repr=False)
    mean = attr.ib(converter=as_vector, repr=False)
    std = attr.ib(converter=as_vector, repr=False)

    def __attrs_post_init__(self):
        d_in = int(np.prod(self.input_shape))
        if self.weights.shape != (self.mean.shape[0], d_in) or self.std.shape != self.mean.shape:
            raise InvalidInputError("Projection parameters are inconsistent with the input shape {}.".format(
                self.input_shape
            ))
        if np.any(self.std <= 0.0):
            raise InvalidInputError("Normalization scales must be positive.")

    @property
    def feature_dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def create(cls, input_shape, feature_dim: int, seed: int, calibration=None) -> "RandomProjection":
        """
        Draw the projection and, if calibration frames are given, freeze their feature statistics.
        Without calibration frames the statistics are mean 0 and scale 1.

        :param input_shape:
        :param feature_dim:
        :param seed:
        :param calibration: array of shape (K, *input_shape)
        :return:
        """
        input_shape = as_sizes(input_shape)
        d_in = int(np.prod(input_shape))
        weights = np.random.default_rng(seed).standard_normal((feature_dim, d_in)) / math.sqrt(d_in)
        if calibration is None:
            mean, std = np.zeros(feature_dim), np.ones(feature_dim)
        else:
            frames = np.asarray(calibration, dtype=np.float64).reshape(-1, d_in)
            if frames.shape[0] == 0:
                raise InvalidInputError("The calibration set is empty.")
            projected = frames @ weights.T
            mean = projected.mean(axis=0)
            std = np.maximum(projected.std(axis=0), STD_FLOOR)
        return cls(seed, input_shape, weights, mean, std)

    @classmethod
    def from_spec(cls, spec, env_spec, seed):
        frames = calibration_frames(env_spec, spec.calibration_frames, spec.calibration_mix, seed)
        return cls.create(frames.shape[1:], spec.feature_dim, seed, frames)

    def encode(self, raw) -> np.ndarray:
        x = _as_raw(raw, self.input_shape).reshape(-1)
        return as_vector((self.weights @ x - self.mean) / self.std)

    def digest(self) -> str:
        return digest_arrays(self.weights, self.mean, self.std,
                             tag="random_projection:{}:{}".format(self.seed, self.input_shape))


@attr.s(frozen=True, eq=False)
class Downsample(FrozenEncoder):
    """
    Average pooling of the pixel grid by a fixed factor.
    """
    validity = "rendered pixel grids"

    input_shape = attr.ib(converter=as_sizes)
    pool_factor = attr.ib(converter=int, validator=positive)

    @input_shape.validator
    def _check_input_shape(self, attribute, value):
        if len(value) != 2:
            raise InvalidInputError("Downsampling needs a 2-D pixel grid, got shape {}.".format(value))

    def __attrs_post_init__(self):
        if any(s % self.pool_factor != 0 for s in self.input_shape):
            raise InvalidInputError("The grid {} is not divisible by the pool factor {}.".format(
                self.input_shape, self.pool_factor
            ))

    @property
    def feature_dim(self) -> int:
        rows, cols = self.input_shape
        return (rows // self.pool_factor) * (cols // self.pool_factor)

    @classmethod
    def from_spec(cls, spec, env_spec, seed):
        return cls(make_env(env_spec).observation_shape, spec.pool_factor)

    def encode(self, raw) -> np.ndarray:
        grid = _as_raw(raw, self.input_shape)
        rows, cols = self.input_shape
        p = self.pool_factor
        return as_vector(grid.reshape(rows // p, p, cols // p, p).mean(axis=(1, 3)))

    def digest(self) -> str:
        return digest_arrays(tag="downsample:{}:{}".format(self.input_shape, self.pool_factor))


def _as_table(value) -> dict:
    return {str(k): as_vector(v) for k, v in dict(value).items()}


@attr.s(frozen=True, eq=False)
class FileFeature(FrozenEncoder):
    """
    Serves externally computed features by frame key ("episode:step").
    """
    validity = "the frames the feature table was computed from"

    table = attr.ib(converter=_as_table, repr=False)
    _feature_dim = attr.ib(converter=int, validator=positive)
    metadata = attr.ib(default=attr.Factory(dict), validator=instance_of(dict))

    def __attrs_post_init__(self):
        for key, vector in self.table.items():
            if vector.shape != (self._feature_dim, ):
                raise InvalidInputError("Feature '{}' does not have {} entries.".format(key, self._feature_dim))

    @property
    def feature_dim(self) -> int:
        return self._feature_dim

    @classmethod
    def from_spec(cls, spec, env_spec, seed):
        if not spec.feature_table:
            raise InvalidInputError("The file_feature encoder needs encoder.feature_table.")
        return load_feature_table(spec.feature_table)

    def select(self, step: StepResult):
        return step.frame_key

    def encode(self, raw) -> np.ndarray:
        try:
            return self.table[str(raw)]
        except KeyError:
            raise MissingFeatureError("No features are stored for frame '{}'.".format(raw))

    def digest(self) -> str:
        keys = sorted(self.table)
        return digest_arrays(*(self.table[k] for k in keys), tag="file_feature:" + ",".join(keys))


def load_feature_table(path) -> FileFeature:
    """
    Load a feature table file into a FileFeature encoder.

    :param path:
    :return:
    """
    table = FeatureTableParser.create().load(path)
    return FileFeature(table.rows, table.feature_dim, table.metadata)


@attr.s(frozen=True, eq=False)
class AssembledObservation(object):
    features = attr.ib(converter=as_vector, repr=False)
    proprio = attr.ib(converter=as_vector, repr=False)

    @property
    def assembled(self) -> np.ndarray:
        return as_vector(np.concatenate((self.features, self.proprio)))

    def __len__(self):
        return self.features.shape[0] + self.proprio.shape[0]


def encode(encoder: FrozenEncoder, raw, meter: Optional[LatencyMeter] = None) -> np.ndarray:
    """
    Encode a raw observation, optionally recording the call latency.

    :param encoder:
    :param raw:
    :param meter:
    :return:
    """
    start = time.perf_counter()
    features = encoder.encode(raw)
    if meter is not None:
        meter.record(time.perf_counter() - start)
    return features


def assemble(encoder: FrozenEncoder, raw, proprio, noise_scale: float = 0.0,
             rng: Optional[np.random.Generator] = None, meter: Optional[LatencyMeter] = None) -> AssembledObservation:
    """
    Build [encode(raw), proprio]. With noise_scale > 0 the proprioception is multiplied by
    (1 + noise_scale * z), z standard normal drawn from rng.

    :param encoder:
    :param raw:
    :param proprio:
    :param noise_scale:
    :param rng:
    :param meter:
    :return:
    """
    features = encode(encoder, raw, meter)
    proprio = np.asarray(proprio, dtype=np.float64).reshape(-1)
    check_finite("proprio", proprio)
    if noise_scale > 0.0 and proprio.shape[0] > 0:
        if rng is None:
            raise InvalidInputError("Proprioceptive noise needs a random generator.")
        proprio = proprio * (1.0 + noise_scale * rng.standard_normal(proprio.shape[0]))
    return AssembledObservation(features, proprio)


@attr.s(frozen=True, eq=False)
class ObservationPipeline(object):
    """
    Turns environment step results into policy inputs.
    """
    encoder = attr.ib(validator=instance_of(FrozenEncoder))
    include_proprio = attr.ib(default=False, converter=bool)
    proprio_noise = attr.ib(default=0.0, converter=float, validator=non_negative)

    def observe(self, step: StepResult, rng: Optional[np.random.Generator] = None,
                meter: Optional[LatencyMeter] = None) -> AssembledObservation:
        proprio = step.proprio if self.include_proprio else np.zeros(0)
        return assemble(self.encoder, self.encoder.select(step), proprio, self.proprio_noise, rng, meter)

    def observation_dim(self, env_spec: EnvSpec) -> int:
        return self.encoder.feature_dim + (proprio_dim(env_spec) if self.include_proprio else 0)


def create_encoder(spec: EncoderSpec, env_spec: EnvSpec, seed: int) -> FrozenEncoder:
    """
    Build the encoder registered under spec.kind for the given environment.

    :param spec:
    :param env_spec:
    :param seed:
    :return:
    """
    try:
        encoder_cls = EncoderMeta.classes[spec.kind]
    except KeyError:
        raise InvalidInputError("Encoder '{}' is not known.".format(spec.kind))
    encoder = encoder_cls.from_spec(spec, env_spec, seed)
    log.debug("Created {} with {} features (digest {}).".format(spec.kind, encoder.feature_dim, encoder.digest()))
    return encoder


def create_pipeline(spec: EncoderSpec, env_spec: EnvSpec, seed: int) -> ObservationPipeline:
    return ObservationPipeline(create_encoder(spec, env_spec, seed), spec.include_proprio, spec.proprio_noise)


def calibration_frames(env_spec: EnvSpec, count: int, mix: str, seed: int) -> np.ndarray:
    """
    Collect the first `count` raw observations of seeded rollouts. 'random' uses uniformly random
    actions; 'mixed' fills four equal parts with the scripted expert, the expert with small and with
    large action noise, and random actions.

    :param env_spec:
    :param count:
    :param mix:
    :param seed:
    :return: array of shape (count, *observation_shape)
    """
    if mix not in CALIBRATION_MIXES:
        raise InvalidInputError("Calibration mix '{}' is not known.".format(mix))
    rng = np.random.default_rng(seed)
    env = make_env(env_spec)
    low, high = np.array(env_spec.action_low), np.array(env_spec.action_high)
    half_range = 0.5 * (high - low)

    if mix == "random":
        parts = [(None, count)]
    else:
        quarter = count // 4
        parts = [(0.0, quarter), (0.1, quarter), (0.5, quarter), (None, count - 3 * quarter)]

    frames = list()
    for noise, n in parts:
        collected = 0
        step = env.reset(rng)
        while collected < n:
            frames.append(np.array(step.raw_observation, dtype=np.float64))
            collected += 1
            if step.done:
                step = env.reset(rng)
                continue
            if noise is None:
                action = rng.uniform(low, high)
            else:
                action = env.expert_action() + noise * half_range * rng.standard_normal(env.action_dim)
            step = env.step(action)
    return np.stack(frames)
