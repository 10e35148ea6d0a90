# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from dapgkit.envs import EnvSpec, EnvironmentMeta, DistractorConfig, Distractor, ObservationMode, RewardMode, \
    PointReacher, Pendulum, make_env, scripted_expert, reacher_dynamics, pendulum_dynamics, wrap_angle, \
    action_dim, proprio_dim, as_distractors
from dapgkit.exceptions import InvalidInputError, ProtocolError

ALL_MODES = ("brightness_shift", "light_gradient", "object_recolor", "clutter_blob")


def pixel_env(modes=(), env_id="point_reacher", size=16):
    spec = EnvSpec.for_env(env_id, observation_mode="pixels", pixel_size=size,
                           distractors=DistractorConfig(modes=modes))
    return make_env(spec)


def expert_successes(env_spec, episodes, seed=0):
    env = make_env(env_spec)
    rng = np.random.default_rng(seed)
    successes = 0
    for _ in range(episodes):
        step = env.reset(rng)
        success = False
        while not step.done:
            step = env.step(env.expert_action())
            success = success or step.info["success"]
        successes += int(success)
    return successes


class TestEnvSpec(object):
    def test_registry(self):
        assert set(EnvironmentMeta.classes) >= {"point_reacher", "pendulum"}
        assert EnvironmentMeta.classes["pendulum"] is Pendulum

    def test_defaults(self):
        spec = EnvSpec()
        assert spec.observation_mode is ObservationMode.State
        assert spec.reward_mode is RewardMode.Dense
        assert (spec.horizon, spec.dt) == (100, 0.05)

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            EnvSpec(id="half_cheetah")

    def test_for_env(self):
        spec = EnvSpec.for_env("pendulum", reward_mode="sparse")
        assert spec.horizon == 200
        assert spec.action_low == (-2.0, )
        assert spec.action_high == (2.0, )
        assert spec.reward_mode is RewardMode.Sparse
        assert action_dim(spec) == 1
        assert proprio_dim(spec) == 3

    def test_mode_coercion(self):
        assert EnvSpec(observation_mode="PIXELS").is_pixels
        with pytest.raises(ValueError):
            EnvSpec(reward_mode="shaped")

    def test_action_bound_count(self):
        with pytest.raises(InvalidInputError):
            make_env(EnvSpec(action_low=(-1.0, ), action_high=(1.0, )))


class TestDistractorConfig(object):
    def test_none_is_clean(self):
        assert as_distractors("none") == tuple()
        assert DistractorConfig(modes=("none", )).modes == tuple()

    def test_comma_separated(self):
        modes = as_distractors("brightness_shift, clutter_blob")
        assert modes == (Distractor.BrightnessShift, Distractor.ClutterBlob)

    def test_membership(self):
        config = DistractorConfig().with_modes(("light_gradient", ))
        assert "light_gradient" in config
        assert Distractor.ClutterBlob not in config

    def test_unknown(self):
        with pytest.raises(ValueError):
            as_distractors("fog")

    def test_empty_range(self):
        with pytest.raises(ValueError):
            DistractorConfig(brightness_range=(0.5, -0.5))


class TestProtocol(object):
    def test_step_before_reset(self):
        with pytest.raises(ProtocolError):
            make_env(EnvSpec()).step([0.0, 0.0])

    def test_step_after_end(self):
        env = make_env(EnvSpec(horizon=2))
        env.reset(np.random.default_rng(0))
        env.step([0.0, 0.0])
        assert env.step([0.0, 0.0]).done
        with pytest.raises(ProtocolError):
            env.step([0.0, 0.0])

    def test_horizon_and_frame_keys(self):
        env = make_env(EnvSpec(horizon=5))
        step = env.reset(np.random.default_rng(0), episode=3)
        keys = [step.frame_key]
        while not step.done:
            step = env.step([0.0, 0.0])
            keys.append(step.frame_key)
        assert keys == ["3:{}".format(t) for t in range(6)]
        assert step.info["truncated"]

    def test_episode_counter(self):
        env = make_env(EnvSpec())
        env.reset()
        env.reset()
        assert env.episode == 1

    def test_seeded_reset(self):
        a = make_env(EnvSpec()).reset(np.random.default_rng(4))
        b = make_env(EnvSpec()).reset(np.random.default_rng(4))
        assert np.array_equal(a.state, b.state)

    def test_action_size(self):
        env = make_env(EnvSpec())
        env.reset(np.random.default_rng(0))
        with pytest.raises(InvalidInputError):
            env.step([0.0])

    def test_non_finite_action(self):
        env = make_env(EnvSpec())
        env.reset(np.random.default_rng(0))
        with pytest.raises(InvalidInputError):
            env.step([np.nan, 0.0])

    def test_render_before_reset(self):
        with pytest.raises(ProtocolError):
            pixel_env().render()


class TestPointReacher(object):
    def test_euler_step(self):
        state = reacher_dynamics(np.zeros(6), np.array([1.0, 0.0]), 0.05, 0.5, 1.0)
        assert np.array_equal(state[:4], [0.0, 0.0, 0.05, 0.0])
        state = reacher_dynamics(state, np.array([1.0, 0.0]), 0.05, 0.5, 1.0)
        assert state[0] == pytest.approx(0.0025, abs=1e-15)
        assert state[2] == pytest.approx(0.05 + 0.05 * (1.0 - 0.025), abs=1e-15)

    def test_wall_reflection(self):
        state = reacher_dynamics(np.array([0.99, 0.0, 1.0, 0.0, 0.0, 0.0]), np.zeros(2), 0.05, 0.5, 1.0)
        assert state[0] == pytest.approx(0.96, abs=1e-12)
        assert state[2] == pytest.approx(-0.975, abs=1e-12)

    def test_random_rollout_matches_reintegration(self):
        env = make_env(EnvSpec())
        rng = np.random.default_rng(31)
        step = env.reset(rng)
        x, y, vx, vy, gx, gy = step.state
        for _ in range(50):
            action = rng.uniform(-1.5, 1.5, size=2)
            step = env.step(action)
            ax, ay = np.clip(action, -1.0, 1.0)
            x, vx = x + 0.05 * vx, vx + 0.05 * (ax - 0.5 * vx)
            y, vy = y + 0.05 * vy, vy + 0.05 * (ay - 0.5 * vy)
            if abs(x) > 1.0:
                x, vx = math.copysign(2.0, x) - x, -vx
            if abs(y) > 1.0:
                y, vy = math.copysign(2.0, y) - y, -vy
            assert np.allclose(step.state, [x, y, vx, vy, gx, gy], rtol=0.0, atol=1e-12)
            assert step.reward == pytest.approx(-math.hypot(x - gx, y - gy), abs=1e-12)

    def test_action_is_clipped(self):
        a, b = make_env(EnvSpec()), make_env(EnvSpec())
        a.reset(np.random.default_rng(2))
        b.reset(np.random.default_rng(2))
        assert np.array_equal(a.step([5.0, -7.0]).state, b.step([1.0, -1.0]).state)

    def test_rewards(self):
        env = make_env(EnvSpec())
        env.reset(np.random.default_rng(0))
        env._state = np.array([0.0, 0.0, 0.0, 0.0, 0.3, 0.4])
        assert env.step([0.0, 0.0]).reward == pytest.approx(-0.5, abs=1e-12)

        sparse = make_env(EnvSpec(reward_mode="sparse"))
        sparse.reset(np.random.default_rng(0))
        sparse._state = np.array([0.0, 0.0, 0.0, 0.0, 0.03, 0.0])
        step = sparse.step([0.0, 0.0])
        assert step.reward == 1.0
        assert step.info["success"]

    def test_proprio_excludes_goal(self):
        step = make_env(EnvSpec()).reset(np.random.default_rng(0))
        assert np.array_equal(step.proprio, step.state[:4])
        assert np.array_equal(step.raw_observation, step.state)

    def test_start_positions_uniform(self):
        env = make_env(EnvSpec())
        rng = np.random.default_rng(99)
        starts = np.array([env.reset(rng).state[0] for _ in range(10000)])
        assert np.all(np.abs(starts) <= PointReacher.spawn_extent)
        counts, _ = np.histogram(starts, bins=10, range=(-PointReacher.spawn_extent, PointReacher.spawn_extent))
        chi_square = float(np.sum((counts - 1000.0) ** 2 / 1000.0))
        assert chi_square < 27.88

    def test_expert_action(self):
        action = scripted_expert("point_reacher", [0.0, 0.0, 0.1, 0.0, 0.1, 0.0])
        assert np.allclose(action, [0.4 - 0.25, 0.0], rtol=0.0, atol=1e-15)
        assert np.array_equal(scripted_expert("point_reacher", [0.0, 0.0, 0.0, 0.0, 1.0, -1.0]), [1.0, -1.0])

    def test_expert_solves_task(self):
        assert expert_successes(EnvSpec(), 100) >= 95

    def test_unknown_expert(self):
        with pytest.raises(InvalidInputError):
            scripted_expert("half_cheetah", [0.0])


class TestPendulum(object):
    def test_wrap_angle(self):
        assert wrap_angle(math.pi) == pytest.approx(-math.pi)
        assert wrap_angle(2.0 * math.pi + 0.1) == pytest.approx(0.1)

    def test_upright_equilibrium(self):
        assert np.array_equal(pendulum_dynamics(np.zeros(2), np.zeros(1), 0.05, 9.8), [0.0, 0.0])

    def test_starts_hanging(self):
        env = make_env(EnvSpec.for_env("pendulum"))
        step = env.reset(np.random.default_rng(0))
        assert abs(abs(step.state[0]) - math.pi) <= Pendulum.start_jitter + 1e-12
        assert not step.info["success"]
        assert step.raw_observation.shape == (3, )

    def test_dense_reward_upright(self):
        env = make_env(EnvSpec.for_env("pendulum"))
        env.reset(np.random.default_rng(0))
        env._state = np.zeros(2)
        step = env.step([0.0])
        assert step.reward == 1.0
        assert step.info["success"]

    @pytest.mark.slow
    def test_expert_swings_up(self):
        assert expert_successes(EnvSpec.for_env("pendulum"), 100) >= 90


class TestRender(object):
    def test_clean_frame(self):
        env = pixel_env()
        step = env.reset(np.random.default_rng(0))
        frame = step.raw_observation
        assert frame.shape == (16, 16)
        assert frame.min() >= 0.0 and frame.max() <= 1.0
        assert frame.max() == pytest.approx(1.0)

    def test_agent_glyph_position(self):
        env = pixel_env()
        env.reset(np.random.default_rng(0))
        env._state = np.array([0.0, 0.0, 0.0, 0.0, 0.9, 0.9])
        frame = env.render()
        assert frame[8, 8] == 1.0
        assert frame[15, 0] == 0.0

    def test_distractors_leave_dynamics_alone(self):
        clean, noisy = pixel_env(), pixel_env(ALL_MODES)
        rng_a, rng_b = np.random.default_rng(7), np.random.default_rng(7)
        a, b = clean.reset(rng_a), noisy.reset(rng_b)
        assert clean.visuals["brightness"] == noisy.visuals["brightness"]
        actions = np.random.default_rng(1).uniform(-1.0, 1.0, (30, 2))
        for action in actions:
            a, b = clean.step(action), noisy.step(action)
            assert np.array_equal(a.state, b.state)
            assert (a.reward, a.done) == (b.reward, b.done)

    def test_brightness_shift(self):
        clean, shifted = pixel_env(), pixel_env(("brightness_shift", ))
        clean.reset(np.random.default_rng(3))
        shifted.reset(np.random.default_rng(3))
        expected = np.clip(clean.render() + shifted.visuals["brightness"], 0.0, 1.0)
        assert np.allclose(shifted.render(), expected, rtol=0.0, atol=1e-15)

    def test_blob_confined_to_bounding_box(self):
        for seed in range(10):
            clean, cluttered = pixel_env(), pixel_env(("clutter_blob", ))
            clean.reset(np.random.default_rng(seed))
            cluttered.reset(np.random.default_rng(seed))
            diff = cluttered.render() != clean.render()
            r0, r1, c0, c1 = cluttered.blob_bounding_box()
            outside = diff.copy()
            outside[r0:r1, c0:c1] = False
            assert not np.any(outside)

    def test_pendulum_renders(self):
        env = pixel_env(env_id="pendulum")
        frame = env.reset(np.random.default_rng(0)).raw_observation
        assert frame.shape == (16, 16)
        assert frame.max() == pytest.approx(1.0)
