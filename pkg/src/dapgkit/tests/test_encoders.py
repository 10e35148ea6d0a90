# -*- coding: utf-8 -*-

import numpy as np
import pytest

from dapgkit.encoders import EncoderSpec, EncoderMeta, Identity, RandomProjection, Downsample, FileFeature, \
    LatencyMeter, ObservationPipeline, assemble, encode, create_encoder, create_pipeline, calibration_frames, \
    load_feature_table
from dapgkit.envs import EnvSpec, make_env
from dapgkit.exceptions import InvalidInputError, MissingFeatureError
from dapgkit.storage import write_feature_table


@pytest.fixture()
def pixel_spec():
    return EnvSpec(observation_mode="pixels", pixel_size=8, horizon=10)


class TestEncoderSpec(object):
    def test_registry(self):
        assert {"identity", "random_projection", "downsample", "file_feature"} <= set(EncoderMeta.classes)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            EncoderSpec(kind="resnet")

    def test_unknown_mix(self):
        with pytest.raises(ValueError):
            EncoderSpec(calibration_mix="expert")


class TestIdentity(object):
    def test_encode(self):
        raw = np.array([0.1, -0.2, 0.3])
        features = Identity(3).encode(raw)
        assert np.array_equal(features, raw)
        assert not features.flags.writeable

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            Identity(3).encode(np.zeros(4))

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            Identity(2).encode([np.nan, 0.0])

    def test_from_spec_needs_state(self, pixel_spec):
        with pytest.raises(InvalidInputError):
            create_encoder(EncoderSpec(), pixel_spec, 0)


class TestRandomProjection(object):
    def test_deterministic(self, rng):
        a = RandomProjection.create((4, 4), 5, seed=3)
        b = RandomProjection.create((4, 4), 5, seed=3)
        raw = rng.uniform(size=(4, 4))
        assert np.array_equal(a.encode(raw), b.encode(raw))
        assert a.digest() == b.digest()

    def test_seed_changes_digest(self):
        assert RandomProjection.create((4, 4), 5, seed=3).digest() != RandomProjection.create((4, 4), 5, seed=4).digest()

    def test_linear_without_calibration(self, rng):
        encoder = RandomProjection.create((3, ), 2, seed=1)
        raw = rng.standard_normal(3)
        assert np.allclose(encoder.encode(raw), encoder.weights @ raw, rtol=0.0, atol=1e-14)

    def test_calibration_standardizes(self, rng):
        frames = rng.uniform(size=(200, 4, 4))
        encoder = RandomProjection.create((4, 4), 6, seed=2, calibration=frames)
        features = np.stack([encoder.encode(f) for f in frames])
        assert np.allclose(features.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(features.std(axis=0), 1.0, atol=1e-10)

    def test_constant_calibration_floor(self):
        encoder = RandomProjection.create((2, ), 2, seed=0, calibration=np.ones((5, 2)))
        assert np.all(encoder.std == 1e-6)

    def test_encode_is_pure(self, rng):
        encoder = RandomProjection.create((4, 4), 5, seed=3)
        digest = encoder.digest()
        raw = rng.uniform(size=(4, 4))
        first = encoder.encode(raw)
        encoder.encode(rng.uniform(size=(4, 4)))
        assert np.array_equal(encoder.encode(raw), first)
        assert encoder.digest() == digest

    def test_empty_calibration(self):
        with pytest.raises(InvalidInputError):
            RandomProjection.create((2, ), 2, seed=0, calibration=np.zeros((0, 2)))

    def test_from_spec(self, pixel_spec):
        spec = EncoderSpec(kind="random_projection", feature_dim=7, calibration_frames=20)
        encoder = create_encoder(spec, pixel_spec, 5)
        assert encoder.feature_dim == 7
        assert encoder.input_shape == (8, 8)
        assert encoder.digest() == create_encoder(spec, pixel_spec, 5).digest()


class TestDownsample(object):
    def test_average_pooling(self):
        grid = np.arange(16, dtype=np.float64).reshape(4, 4)
        features = Downsample((4, 4), 2).encode(grid)
        assert np.array_equal(features, [2.5, 4.5, 10.5, 12.5])

    def test_feature_dim(self):
        assert Downsample((32, 32), 4).feature_dim == 64

    def test_indivisible(self):
        with pytest.raises(InvalidInputError):
            Downsample((10, 10), 4)

    def test_needs_grid(self):
        with pytest.raises(InvalidInputError):
            Downsample((16, ), 4)


class TestFileFeature(object):
    def test_lookup(self):
        encoder = FileFeature({"0:0": [1.0, 2.0], "0:1": [3.0, 4.0]}, 2)
        assert np.array_equal(encoder.encode("0:1"), [3.0, 4.0])

    def test_missing_key(self):
        with pytest.raises(MissingFeatureError):
            FileFeature({"0:0": [1.0, 2.0]}, 2).encode("5:5")

    def test_wrong_width(self):
        with pytest.raises(InvalidInputError):
            FileFeature({"0:0": [1.0, 2.0, 3.0]}, 2)

    def test_selects_frame_key(self):
        env = make_env(EnvSpec())
        step = env.reset(np.random.default_rng(0), episode=4)
        assert FileFeature({"4:0": [1.0]}, 1).select(step) == "4:0"

    def test_load_table(self, tmpdir):
        path = tmpdir.join("features.txt")
        write_feature_table(str(path), {"1:0": [0.5, 0.25], "0:3": [1.0, -1.0]}, 2, {"source": "external_cnn"})
        encoder = load_feature_table(str(path))
        assert encoder.feature_dim == 2
        assert encoder.metadata == {"source": "external_cnn"}
        assert np.array_equal(encoder.encode("0:3"), [1.0, -1.0])

    def test_pipeline_serves_episode(self, tmpdir):
        env_spec = EnvSpec(horizon=3)
        table = {"2:{}".format(t): [float(t)] for t in range(4)}
        path = tmpdir.join("features.txt")
        write_feature_table(str(path), table, 1)
        pipeline = create_pipeline(EncoderSpec(kind="file_feature", feature_table=str(path)), env_spec, 0)
        env = make_env(env_spec)
        step = env.reset(np.random.default_rng(0), episode=2)
        seen = [pipeline.observe(step).assembled[0]]
        while not step.done:
            step = env.step([0.0, 0.0])
            seen.append(pipeline.observe(step).assembled[0])
        assert seen == [0.0, 1.0, 2.0, 3.0]

    def test_from_spec_needs_table(self):
        with pytest.raises(InvalidInputError):
            create_encoder(EncoderSpec(kind="file_feature"), EnvSpec(), 0)


class TestAssemble(object):
    def test_concatenation(self):
        observation = assemble(Identity(2), [1.0, 2.0], [3.0])
        assert np.array_equal(observation.assembled, [1.0, 2.0, 3.0])
        assert len(observation) == 3

    def test_no_noise_is_exact(self, rng):
        observation = assemble(Identity(1), [1.0], [0.3, -0.7], 0.0, rng)
        assert np.array_equal(observation.proprio, [0.3, -0.7])

    def test_multiplicative_noise(self):
        observation = assemble(Identity(1), [1.0], [0.3, -0.7], 0.1, np.random.default_rng(5))
        z = np.random.default_rng(5).standard_normal(2)
        assert np.allclose(observation.proprio, np.array([0.3, -0.7]) * (1.0 + 0.1 * z), rtol=0.0, atol=1e-15)

    def test_noise_needs_rng(self):
        with pytest.raises(InvalidInputError):
            assemble(Identity(1), [1.0], [0.3], 0.1)

    def test_meter(self):
        meter = LatencyMeter()
        encode(Identity(1), [1.0], meter)
        assemble(Identity(1), [1.0], [], meter=meter)
        assert meter.calls == 2
        assert meter.total_s >= 0.0


class TestPipeline(object):
    def test_state_dimensions(self):
        spec = EnvSpec()
        assert create_pipeline(EncoderSpec(), spec, 0).observation_dim(spec) == 6
        assert create_pipeline(EncoderSpec(include_proprio=True), spec, 0).observation_dim(spec) == 10

    def test_proprio_has_no_goal(self):
        spec = EnvSpec()
        pipeline = ObservationPipeline(Downsample((8, 8), 2), include_proprio=True)
        env = make_env(EnvSpec(observation_mode="pixels", pixel_size=8))
        step = env.reset(np.random.default_rng(1))
        observation = pipeline.observe(step)
        assert np.array_equal(observation.proprio, env.state[:4])
        assert len(observation) == pipeline.observation_dim(spec)


class TestCalibrationFrames(object):
    def test_shapes(self, pixel_spec):
        frames = calibration_frames(pixel_spec, 25, "random", 0)
        assert frames.shape == (25, 8, 8)
        assert np.all((frames >= 0.0) & (frames <= 1.0))

    def test_mixed_is_seeded(self, pixel_spec):
        a = calibration_frames(pixel_spec, 24, "mixed", 3)
        b = calibration_frames(pixel_spec, 24, "mixed", 3)
        assert a.shape == (24, 8, 8)
        assert np.array_equal(a, b)

    def test_unknown_mix(self, pixel_spec):
        with pytest.raises(InvalidInputError):
            calibration_frames(pixel_spec, 4, "expert", 0)
