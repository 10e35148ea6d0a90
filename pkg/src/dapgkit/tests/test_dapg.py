# -*- coding: utf-8 -*-

import attr
import numpy as np
import pytest

import dapgkit.dapg

from dapgkit.advantage import GaeConfig
from dapgkit.baseline import FitConfig
from dapgkit.core import DemoSet, SampleBatch, Trajectory, FlatVector
from dapgkit.dapg import DapgConfig, TrainState, bc_loss, bc_pretrain, demo_weight, augmented_gradient, \
    run_episode, collect_rollouts, train
from dapgkit.encoders import Identity, ObservationPipeline
from dapgkit.envs import EnvSpec, make_env
from dapgkit.exceptions import InvalidInputError, StepRejectedError, NumericalFailureError, TrainingFaultError
from dapgkit.nnet import MlpSpec, MlpParams
from dapgkit.npg import NpgConfig, policy_gradient
from dapgkit.policy import GaussianPolicy, grad_log_prob, score_weighted_sum
from dapgkit.reports import StepStatus


def expert_demos(env_spec, pipeline, count, seed=0, steps=10):
    """Scripted expert trajectories in the assembled observation space."""
    rng = np.random.default_rng(seed)
    env = make_env(env_spec)
    trajectories = list()
    for episode in range(count):
        step = env.reset(rng, episode=episode)
        observations, actions = list(), list()
        for _ in range(steps):
            observations.append(pipeline.observe(step).assembled)
            action = env.expert_action()
            actions.append(action)
            step = env.step(action)
        trajectories.append(Trajectory.from_arrays(observations, actions, np.zeros(steps), np.zeros(steps),
                                                   pipeline.observe(step).assembled))
    return DemoSet(trajectories, "scripted_expert:{}".format(env_spec.id))


@pytest.fixture()
def env_spec():
    return EnvSpec(horizon=20)


@pytest.fixture()
def pipeline():
    return ObservationPipeline(Identity(6))


@pytest.fixture()
def demos(env_spec, pipeline):
    return expert_demos(env_spec, pipeline, 3)


@pytest.fixture()
def tiny_cfg():
    return DapgConfig(policy_hidden_sizes=(8, ), trajectories_per_iteration=3, horizon=10, iterations=2,
                      bc_epochs=2, bc_batch_size=8)


@pytest.fixture()
def tiny_fit():
    return FitConfig(hidden_sizes=(8, ), epochs=1)


class TestDapgConfig(object):
    def test_defaults(self):
        cfg = DapgConfig()
        assert (cfg.lam0, cfg.lam1) == (0.01, 0.95)
        assert cfg.policy_hidden_sizes == (256, 256)
        assert cfg.demo_term == "mean"
        assert cfg.clamp_demo_weight

    def test_invalid_demo_term(self):
        with pytest.raises(ValueError):
            DapgConfig(demo_term="median")

    def test_invalid_lam1(self):
        with pytest.raises(ValueError):
            DapgConfig(lam1=1.5)


class TestDemoWeight(object):
    def test_decay(self):
        w = demo_weight([0.3, 2.0, -1.0], DapgConfig(), 3)
        assert w == pytest.approx(0.0171475, abs=1e-9)

    def test_decay_ratio(self):
        cfg = DapgConfig(lam0=0.3, lam1=0.8)
        advantages = [0.2, 1.7, -0.4]
        for k in range(20):
            ratio = demo_weight(advantages, cfg, k + 1) / demo_weight(advantages, cfg, k)
            assert ratio == pytest.approx(0.8, rel=1e-14)

    def test_first_iteration(self):
        assert demo_weight([0.5, 1.0], DapgConfig(), 0) == pytest.approx(0.01, rel=1e-12)

    def test_negative_maximum_is_kept(self):
        assert demo_weight([-1.0, -3.0], DapgConfig(), 0) == pytest.approx(-0.01, rel=1e-12)

    def test_lam0_zero(self):
        assert demo_weight([5.0], DapgConfig(lam0=0.0), 4) == 0.0

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            demo_weight([], DapgConfig(), 0)

    def test_negative_iteration(self):
        with pytest.raises(InvalidInputError):
            demo_weight([1.0], DapgConfig(), -1)


class TestAugmentedGradient(object):
    @pytest.fixture()
    def small_demos(self, small_policy, rng):
        trajectory = Trajectory.from_arrays(rng.standard_normal((5, 2)), rng.standard_normal((5, 2)), np.zeros(5),
                                            np.zeros(5), rng.standard_normal(2))
        return DemoSet([trajectory])

    def test_zero_weight_is_vanilla(self, small_policy, sample_batch, small_demos):
        augmented = augmented_gradient(small_policy, sample_batch, small_demos, 0.0)
        assert np.array_equal(augmented.values, policy_gradient(small_policy, sample_batch).values)

    def test_empty_demos_is_vanilla(self, small_policy, sample_batch):
        augmented = augmented_gradient(small_policy, sample_batch, DemoSet([]), 0.5)
        assert np.array_equal(augmented.values, policy_gradient(small_policy, sample_batch).values)

    def test_mean_term(self, small_policy, sample_batch, small_demos):
        w = 0.37
        demo_scores = [grad_log_prob(small_policy, o, a).values
                       for o, a in zip(small_demos.observations, small_demos.actions)]
        expected = policy_gradient(small_policy, sample_batch).values + w * np.mean(demo_scores, axis=0)
        augmented = augmented_gradient(small_policy, sample_batch, small_demos, w)
        assert np.allclose(augmented.values, expected, rtol=0.0, atol=1e-12)

    def test_linear_in_weight(self, small_policy, sample_batch, small_demos):
        vanilla = augmented_gradient(small_policy, sample_batch, small_demos, 0.0).values
        unit = augmented_gradient(small_policy, sample_batch, small_demos, 1.0).values - vanilla
        for w in (0.25, 1.5, -0.7, 40.0):
            augmented = augmented_gradient(small_policy, sample_batch, small_demos, w).values
            assert np.allclose(augmented - vanilla, w * unit, rtol=0.0, atol=1e-10 * max(1.0, abs(w)))

    def test_sum_term(self, small_policy, sample_batch, small_demos):
        w = 0.37
        mean = augmented_gradient(small_policy, sample_batch, small_demos, w, "mean").values
        total = augmented_gradient(small_policy, sample_batch, small_demos, w, "sum").values
        vanilla = policy_gradient(small_policy, sample_batch).values
        assert np.allclose(total - vanilla, 5.0 * (mean - vanilla), rtol=1e-10, atol=1e-12)

    def test_unknown_term(self, small_policy, sample_batch, small_demos):
        with pytest.raises(InvalidInputError):
            augmented_gradient(small_policy, sample_batch, small_demos, 0.1, "median")


class TestBehaviorCloning(object):
    @pytest.fixture()
    def single_pair(self):
        return DemoSet([Trajectory.from_arrays([[1.0]], [[0.5]], [0.0], [0.0], [0.0])])

    @pytest.fixture()
    def zero_policy(self):
        spec = MlpSpec(1, (), 1)
        return GaussianPolicy(spec, MlpParams.zeros(spec), np.array([-0.7]))

    def test_loss(self, zero_policy, single_pair):
        assert bc_loss(zero_policy, single_pair) == pytest.approx(0.125, rel=1e-12)

    def test_converges_on_single_pair(self, zero_policy, single_pair, rng):
        cfg = DapgConfig(bc_learning_rate=0.01, bc_epochs=300)
        cloned, report = bc_pretrain(zero_policy, single_pair, cfg, rng)
        assert report.initial_loss == pytest.approx(0.125, rel=1e-12)
        assert report.final_loss < 1e-8
        assert report.epochs == 300
        assert cloned.mean([1.0])[0] == pytest.approx(0.5, abs=1e-4)
        assert np.array_equal(cloned.log_std, zero_policy.log_std)

    def test_first_update_is_normalized(self, zero_policy, single_pair, rng):
        cloned, _ = bc_pretrain(zero_policy, single_pair, DapgConfig(bc_learning_rate=0.01, bc_epochs=1), rng)
        assert np.allclose(cloned.mean_params.values, [0.01, 0.01], rtol=1e-5)

    def test_loss_ignores_trajectory_order(self, demos):
        policy = GaussianPolicy.create(6, 2, (16, ), seed=3)
        shuffled = DemoSet([demos.trajectories[i] for i in (2, 0, 1)], demos.source_tag)
        assert bc_loss(policy, shuffled) == pytest.approx(bc_loss(policy, demos), rel=1e-12)

    def test_reduces_loss_on_expert_demos(self, demos, rng):
        policy = GaussianPolicy.create(6, 2, (16, ), seed=3)
        _, report = bc_pretrain(policy, demos, DapgConfig(bc_epochs=50, bc_learning_rate=1e-2, bc_batch_size=8), rng)
        assert report.final_loss < report.initial_loss

    def test_zero_epochs(self, zero_policy, single_pair, rng):
        cloned, report = bc_pretrain(zero_policy, single_pair, DapgConfig(bc_epochs=0), rng)
        assert np.array_equal(cloned.theta.values, zero_policy.theta.values)
        assert report.initial_loss == report.final_loss

    def test_empty_demos(self, zero_policy, rng):
        with pytest.raises(InvalidInputError):
            bc_pretrain(zero_policy, DemoSet([]), DapgConfig(), rng)

    def test_dimension_mismatch(self, small_policy, single_pair, rng):
        with pytest.raises(InvalidInputError):
            bc_pretrain(small_policy, single_pair, DapgConfig(), rng)


class TestRollouts(object):
    def test_episode_length_and_frames(self, env_spec, pipeline):
        policy = GaussianPolicy.create(6, 2, (8, ), seed=1)
        rollout = run_episode(env_spec, pipeline, policy, np.random.SeedSequence(5), 7, horizon=10, keep_frames=True)
        assert len(rollout.trajectory) == 10
        assert rollout.trajectory.observation_dim == 6
        assert rollout.frame_keys[0] == "7:0"
        assert rollout.frame_keys[-1] == "7:10"
        assert len(rollout.raw_frames) == 11
        assert rollout.episode_return == pytest.approx(float(np.sum(rollout.trajectory.rewards)))

    def test_environment_horizon_ends_episode(self, env_spec, pipeline):
        policy = GaussianPolicy.create(6, 2, (8, ), seed=1)
        rollout = run_episode(env_spec, pipeline, policy, np.random.SeedSequence(5), 0, horizon=1000)
        assert len(rollout.trajectory) == env_spec.horizon

    def test_seeded_replay(self, env_spec, pipeline):
        policy = GaussianPolicy.create(6, 2, (8, ), seed=1)
        first = collect_rollouts(env_spec, pipeline, policy, 3, np.random.default_rng(9))
        second = collect_rollouts(env_spec, pipeline, policy, 3, np.random.default_rng(9))
        for a, b in zip(first, second):
            assert np.array_equal(a.trajectory.actions, b.trajectory.actions)
            assert np.array_equal(a.trajectory.rewards, b.trajectory.rewards)

    def test_deterministic_uses_mean(self, env_spec, pipeline):
        policy = GaussianPolicy.create(6, 2, (8, ), seed=1)
        rollout, = collect_rollouts(env_spec, pipeline, policy, 1, np.random.default_rng(9), deterministic=True)
        first = rollout.trajectory.transitions[0]
        assert np.array_equal(first.action, policy.mean(first.observation))

    def test_workers_do_not_change_results(self, env_spec, pipeline):
        policy = GaussianPolicy.create(6, 2, (8, ), seed=1)
        serial = collect_rollouts(env_spec, pipeline, policy, 4, np.random.default_rng(3), workers=1)
        parallel = collect_rollouts(env_spec, pipeline, policy, 4, np.random.default_rng(3), workers=2)
        for a, b in zip(serial, parallel):
            assert np.array_equal(a.trajectory.observations, b.trajectory.observations)
            assert np.array_equal(a.trajectory.actions, b.trajectory.actions)


class TestTrain(object):
    def test_zero_iterations_only_clones(self, env_spec, pipeline, demos, tiny_cfg, tiny_fit):
        cfg = DapgConfig(policy_hidden_sizes=(8, ), iterations=0, bc_epochs=3)
        state = train(env_spec, pipeline, demos, np.random.default_rng(0), cfg, fit_cfg=tiny_fit)
        assert isinstance(state, TrainState)
        assert state.k == 0
        assert state.metrics == []
        assert state.bc_report.epochs == 3

    def test_iterations(self, env_spec, pipeline, demos, tiny_cfg, tiny_fit):
        seen = list()
        state = train(env_spec, pipeline, demos, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit,
                      observer=seen.append)
        assert state.k == 2
        assert [r.k for r in state.metrics] == [0, 1]
        assert len(seen) == 2
        for diagnostics in seen:
            assert diagnostics.demo_weight >= 0.0
            assert diagnostics.record.demo_weight == diagnostics.demo_weight
            assert diagnostics.record.wall_clock_s >= 0.0
            assert diagnostics.record.phase_times.encode_calls == 3 * 11
            assert len(diagnostics.advantages) == 3 * tiny_cfg.horizon
            assert 0.0 <= diagnostics.record.success_rate <= 1.0

    def test_reproducible(self, env_spec, pipeline, demos, tiny_cfg, tiny_fit):
        first = train(env_spec, pipeline, demos, np.random.default_rng(11), tiny_cfg, fit_cfg=tiny_fit)
        second = train(env_spec, pipeline, demos, np.random.default_rng(11), tiny_cfg, fit_cfg=tiny_fit)
        assert np.array_equal(first.policy.theta.values, second.policy.theta.values)
        assert [r.mean_return for r in first.metrics] == [r.mean_return for r in second.metrics]

    def test_without_demos(self, env_spec, pipeline, tiny_cfg, tiny_fit):
        state = train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit)
        assert state.bc_report is None
        assert state.k == 2

    def test_rejected_step_is_recorded(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker):
        mocker.patch("dapgkit.dapg.npg_step", side_effect=StepRejectedError("not positive"))
        policy = GaussianPolicy.create(6, 2, (8, ), seed=4)
        state = train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit, policy=policy)
        assert state.k == 2
        assert all(r.step_status is StepStatus.Rejected for r in state.metrics)
        assert np.array_equal(state.policy.theta.values, policy.theta.values)

    def test_collection_fault(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker):
        mocker.patch("dapgkit.dapg.collect_rollouts", side_effect=RuntimeError("simulator crashed"))
        with pytest.raises(TrainingFaultError) as e:
            train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit)
        assert e.value.state.k == 0
        assert "simulator crashed" in str(e.value)

    def test_numerical_fault(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker):
        mocker.patch("dapgkit.dapg.npg_step", side_effect=NumericalFailureError("nan", iteration=3))
        with pytest.raises(TrainingFaultError) as e:
            train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit)
        assert e.value.state.k == 0

    def test_demo_dimension_mismatch(self, env_spec, pipeline, tiny_cfg):
        demos = DemoSet([Trajectory.from_arrays([[0.0, 0.0]], [[0.0, 0.0]], [0.0], [0.0], [0.0, 0.0])])
        with pytest.raises(InvalidInputError):
            train(env_spec, pipeline, demos, np.random.default_rng(0), tiny_cfg)

    def test_policy_dimension_mismatch(self, env_spec, pipeline, small_policy, tiny_cfg):
        with pytest.raises(InvalidInputError):
            train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, policy=small_policy)

    def test_step_size_controls_update(self, env_spec, pipeline, tiny_fit):
        cfg = DapgConfig(policy_hidden_sizes=(8, ), trajectories_per_iteration=3, horizon=10, iterations=1,
                         bc_epochs=0)
        policy = GaussianPolicy.create(6, 2, (8, ), seed=4)
        state = train(env_spec, pipeline, None, np.random.default_rng(0), cfg, NpgConfig(step_size_delta=0.01),
                      GaeConfig(), tiny_fit, policy=policy)
        record, = state.metrics
        assert record.step_status is StepStatus.Applied
        assert record.quadratic_form == pytest.approx(0.01, rel=1e-3)
        assert not np.array_equal(state.policy.theta.values, policy.theta.values)

    def test_demo_term_is_only_difference(self, env_spec, pipeline, demos, tiny_fit):
        policy = GaussianPolicy.create(6, 2, (8, ), seed=4)
        seen = dict()
        for lam0 in (0.0, 0.5):
            cfg = DapgConfig(policy_hidden_sizes=(8, ), trajectories_per_iteration=3, horizon=10, iterations=1,
                             bc_epochs=0, lam0=lam0)
            observed = list()
            train(env_spec, pipeline, demos, np.random.default_rng(21), cfg, fit_cfg=tiny_fit, policy=policy,
                  observer=observed.append)
            seen[lam0], = observed
        vanilla, dapg = seen[0.0], seen[0.5]
        assert np.array_equal(vanilla.vanilla_gradient.values, dapg.vanilla_gradient.values)
        assert np.array_equal(vanilla.augmented_gradient.values, vanilla.vanilla_gradient.values)
        assert vanilla.demo_weight == 0.0
        assert dapg.demo_weight > 0.0
        mean_score = score_weighted_sum(policy, demos.observations, demos.actions,
                                        np.ones(demos.pair_count)).values / demos.pair_count
        difference = dapg.augmented_gradient.values - dapg.vanilla_gradient.values
        assert np.allclose(difference, dapg.demo_weight * mean_score, rtol=1e-10, atol=1e-12)

    def test_negative_weight_clamped(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker, caplog):
        mocker.patch("dapgkit.dapg.demo_weight", return_value=-0.5)
        seen = list()
        cfg = attr.evolve(tiny_cfg, iterations=1)
        train(env_spec, pipeline, None, np.random.default_rng(0), cfg, fit_cfg=tiny_fit, observer=seen.append)
        diagnostics, = seen
        assert diagnostics.raw_demo_weight == -0.5
        assert diagnostics.demo_weight == 0.0
        assert diagnostics.record.demo_weight == 0.0
        assert "clamped" in caplog.text

    def test_negative_weight_kept(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker):
        mocker.patch("dapgkit.dapg.demo_weight", return_value=-0.5)
        seen = list()
        cfg = attr.evolve(tiny_cfg, iterations=1, clamp_demo_weight=False)
        train(env_spec, pipeline, None, np.random.default_rng(0), cfg, fit_cfg=tiny_fit, observer=seen.append)
        assert seen[0].record.demo_weight == -0.5

    def test_single_step_batches(self, env_spec, pipeline, tiny_fit):
        cfg = DapgConfig(policy_hidden_sizes=(8, ), trajectories_per_iteration=1, horizon=1, iterations=2,
                         bc_epochs=0)
        seen = list()
        state = train(env_spec, pipeline, None, np.random.default_rng(0), cfg, fit_cfg=tiny_fit,
                      observer=seen.append)
        assert state.k == 2
        assert all(len(d.advantages) == 1 for d in seen)

    def test_learning_fault(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker):
        mocker.patch("dapgkit.dapg.fit", side_effect=InvalidInputError("bad targets"))
        with pytest.raises(TrainingFaultError) as e:
            train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit)
        assert e.value.state.k == 0
        assert isinstance(e.value.__cause__, InvalidInputError)
        assert "bad targets" in str(e.value)

    @pytest.mark.parametrize("workers, collect_is_wall", [(1, False), (2, True)])
    def test_collect_time_not_negative(self, env_spec, pipeline, tiny_cfg, tiny_fit, mocker, workers,
                                       collect_is_wall):
        collect = dapgkit.dapg.collect_rollouts

        def slow_encoding(env_spec, pipeline, policy, count, rng, workers, horizon, **kwargs):
            rollouts = collect(env_spec, pipeline, policy, count, rng, 1, horizon, **kwargs)
            return [attr.evolve(r, encode_s=100.0) for r in rollouts]

        mocker.patch("dapgkit.dapg.collect_rollouts", side_effect=slow_encoding)
        cfg = attr.evolve(tiny_cfg, iterations=1, workers=workers)
        state = train(env_spec, pipeline, None, np.random.default_rng(0), cfg, fit_cfg=tiny_fit)
        times = state.metrics[0].phase_times
        assert times.encode_s == 300.0
        assert times.collect_s >= 0.0
        assert (times.collect_s > 0.0) == collect_is_wall

    def test_bc_loss_on_first_record(self, env_spec, pipeline, demos, tiny_cfg, tiny_fit):
        state = train(env_spec, pipeline, demos, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit)
        assert state.metrics[0].bc_loss == state.bc_report.final_loss
        assert state.metrics[1].bc_loss is None

    def test_no_bc_loss_without_demos(self, env_spec, pipeline, tiny_cfg, tiny_fit):
        state = train(env_spec, pipeline, None, np.random.default_rng(0), tiny_cfg, fit_cfg=tiny_fit)
        assert all(r.bc_loss is None for r in state.metrics)
