# -*- coding: utf-8 -*-

"""
Demonstration-augmented natural policy gradient training.

A behavior-cloned warm start is followed by natural gradient iterations whose gradient
adds a demonstration term,

    g_aug = g + w_k * mean_{(s, a) in demos} grad log pi(a | s),  w_k = lam0 * lam1^k * max A,

so the imitation objective decays geometrically while the task objective takes over.
"""

import concurrent.futures
import logging
import time
from typing import Optional, Callable, List, Sequence

import attr
import numpy as np
from attr.validators import instance_of, optional

from .advantage import GaeConfig, batch_advantages
from .baseline import ValueFunction, FitConfig, fit
from .core import DemoSet, SampleBatch, FlatVector, Trajectory, Transition, discounted_return
from .data_abstractions import DataModel
from .encoders import ObservationPipeline, LatencyMeter
from .envs import EnvSpec, make_env, action_dim
from .exceptions import InvalidInputError, StepRejectedError, NumericalFailureError, TrainingFaultError
from .nnet import MlpParams, Linearization, Adam
from .npg import NpgConfig, policy_gradient, npg_step
from .policy import GaussianPolicy, act, score_weighted_sum
from .reports import BcReport, StepReport, StepStatus, PhaseTimes, IterationRecord
from .utilities import as_sizes, in_range, positive, non_negative

log = logging.getLogger(__name__)

DEMO_TERMS = ("mean", "sum")


@attr.s(frozen=True)
class DapgConfig(DataModel):
    lam0 = attr.ib(default=0.01, converter=float, validator=non_negative)
    lam1 = attr.ib(default=0.95, converter=float, validator=in_range(0.0, 1.0))
    bc_batch_size = attr.ib(default=32, converter=int, validator=positive)
    bc_epochs = attr.ib(default=5, converter=int, validator=non_negative)
    bc_learning_rate = attr.ib(default=1e-3, converter=float, validator=positive)
    trajectories_per_iteration = attr.ib(default=20, converter=int, validator=positive)
    horizon = attr.ib(default=100, converter=int, validator=positive)
    iterations = attr.ib(default=100, converter=int, validator=non_negative)
    policy_hidden_sizes = attr.ib(default=(256, 256), converter=as_sizes)
    init_log_std = attr.ib(default=0.0, converter=float)
    standardize_advantages = attr.ib(default=True, converter=attr.converters.to_bool)
    clamp_demo_weight = attr.ib(default=True, converter=attr.converters.to_bool)
    demo_term = attr.ib(default="mean", validator=attr.validators.in_(DEMO_TERMS))
    workers = attr.ib(default=1, converter=int, validator=positive)
    eval_rollouts = attr.ib(default=75, converter=int, validator=positive)


@attr.s
class TrainState(object):
    """
    The learner state after k completed iterations.
    """
    k = attr.ib(validator=instance_of(int))
    policy = attr.ib(validator=instance_of(GaussianPolicy))
    vf = attr.ib(validator=instance_of(ValueFunction))
    metrics = attr.ib(default=attr.Factory(list), validator=instance_of(list))
    bc_report = attr.ib(default=None, validator=optional(instance_of(BcReport)))


@attr.s(frozen=True, eq=False)
class IterationDiagnostics(object):
    """
    Everything an observer may inspect about one iteration.
    """
    record = attr.ib(validator=instance_of(IterationRecord))
    vanilla_gradient = attr.ib(validator=instance_of(FlatVector))
    augmented_gradient = attr.ib(validator=instance_of(FlatVector))
    advantages = attr.ib(repr=False)
    raw_demo_weight = attr.ib(converter=float)
    demo_weight = attr.ib(converter=float)
    step_report = attr.ib(validator=instance_of(StepReport))


@attr.s(frozen=True, eq=False)
class Rollout(object):
    trajectory = attr.ib(validator=instance_of(Trajectory))
    success = attr.ib(converter=bool)
    episode_return = attr.ib(converter=float)
    encode_s = attr.ib(default=0.0, converter=float)
    encode_calls = attr.ib(default=0, converter=int)
    raw_frames = attr.ib(default=None, repr=False)
    frame_keys = attr.ib(default=None, repr=False)


def _check_demos(policy: GaussianPolicy, demos: DemoSet) -> None:
    if demos is None or demos.is_empty:
        raise InvalidInputError("Behavior cloning needs at least one demonstration.")
    if demos.observation_dim != policy.observation_dim or demos.action_dim != policy.action_dim:
        raise InvalidInputError("Demonstrations have dimensions ({}, {}), the policy expects ({}, {}).".format(
            demos.observation_dim, demos.action_dim, policy.observation_dim, policy.action_dim
        ))


def bc_loss(policy: GaussianPolicy, demos: DemoSet) -> float:
    """
    The behavior cloning loss over the full demonstration set: (1/|D|) sum 1/2 ||mu(s) - a||^2.

    :param policy:
    :param demos:
    :return:
    """
    _check_demos(policy, demos)
    residual = policy.mean_batch(demos.observations) - demos.actions
    return float(0.5 * np.mean(np.sum(residual ** 2, axis=1)))


def bc_pretrain(policy: GaussianPolicy, demos: DemoSet, cfg: DapgConfig, rng: np.random.Generator):
    """
    Regress the policy mean onto the demonstrated actions with shuffled minibatch Adam
    updates. The log standard deviation is left untouched.

    :param policy:
    :param demos:
    :param cfg:
    :param rng:
    :return: the cloned policy and a BcReport with the full-set loss before and after
    """
    _check_demos(policy, demos)
    observations, actions = demos.observations, demos.actions
    initial_loss = bc_loss(policy, demos)
    count = observations.shape[0]
    values = policy.mean_params.values.copy()
    optimizer = Adam(cfg.bc_learning_rate)
    for epoch in range(cfg.bc_epochs):
        order = rng.permutation(count)
        for start in range(0, count, cfg.bc_batch_size):
            idx = order[start:start + cfg.bc_batch_size]
            linearization = Linearization.create(policy.spec, MlpParams(FlatVector(values)), observations[idx])
            residual = linearization.outputs - actions[idx]
            grad, _ = linearization.vjp(residual / idx.shape[0])
            values = optimizer.step(values, grad.values)
        log.debug("BC epoch {}: loss {:.4e}.".format(
            epoch, bc_loss(policy.with_mean_params(MlpParams(FlatVector(values))), demos)
        ))

    cloned = policy.with_mean_params(MlpParams(FlatVector(values)))
    report = BcReport(initial_loss, bc_loss(cloned, demos), cfg.bc_epochs)
    log.info("Behavior cloning: loss {:.4e} -> {:.4e} over {} epochs.".format(
        report.initial_loss, report.final_loss, report.epochs
    ))
    return cloned, report


def demo_weight(advantages, cfg: DapgConfig, k: int) -> float:
    """
    The heuristic demonstration weight w = lam0 * lam1^k * max(advantages). The sign of the
    result is not altered here.

    :param advantages:
    :param cfg:
    :param k:
    :return:
    """
    advantages = np.asarray(advantages, dtype=np.float64).reshape(-1)
    if advantages.shape[0] == 0:
        raise InvalidInputError("The demo weight needs at least one advantage.")
    if k < 0:
        raise InvalidInputError("The iteration counter must be non-negative.")
    return cfg.lam0 * cfg.lam1 ** k * float(np.max(advantages))


def augmented_gradient(policy: GaussianPolicy, batch: SampleBatch, demos: DemoSet, w: float,
                       demo_term: str = "mean") -> FlatVector:
    """
    The policy gradient over the on-policy batch plus w times the mean (or sum) of the
    demonstration score vectors. An empty demo set or w = 0 returns the policy gradient itself.

    :param policy:
    :param batch:
    :param demos:
    :param w:
    :param demo_term: 'mean' or 'sum'
    :return:
    """
    g = policy_gradient(policy, batch)
    if demos is None or demos.is_empty or w == 0.0:
        return g
    if demo_term not in DEMO_TERMS:
        raise InvalidInputError("Demo term '{}' is not known.".format(demo_term))
    count = demos.pair_count
    demo_scores = score_weighted_sum(policy, demos.observations, demos.actions, np.full(count, w))
    if demo_term == "mean":
        demo_scores = demo_scores.scale(1.0 / count)
    return FlatVector(g.values + demo_scores.values)


def run_episode(env_spec: EnvSpec, pipeline: ObservationPipeline, policy: GaussianPolicy,
                seed: np.random.SeedSequence, episode: int, horizon: int, deterministic: bool = False,
                keep_frames: bool = False) -> Rollout:
    """
    Roll out one episode until the environment ends it or `horizon` steps have been taken.

    :param env_spec:
    :param pipeline:
    :param policy:
    :param seed:
    :param episode: the episode id used for frame keys
    :param horizon:
    :param deterministic: act with the policy mean
    :param keep_frames: also return the raw observations and frame keys
    :return:
    """
    env = make_env(env_spec)
    rng = np.random.default_rng(seed)
    meter = LatencyMeter()
    frames, keys = list(), list()

    step = env.reset(rng, episode=episode)
    observation = pipeline.observe(step, rng, meter).assembled
    transitions = list()
    success = False
    for t in range(horizon):
        if keep_frames:
            frames.append(step.raw_observation)
            keys.append(step.frame_key)
        action, log_prob = act(policy, observation, rng, deterministic)
        step = env.step(action)
        success = success or step.info["success"]
        next_observation = pipeline.observe(step, rng, meter).assembled
        transitions.append(Transition(observation, action, step.reward, log_prob, False))
        observation = next_observation
        if step.done:
            break
    if keep_frames:
        frames.append(step.raw_observation)
        keys.append(step.frame_key)

    trajectory = Trajectory(transitions, observation)
    return Rollout(trajectory, success, trajectory.undiscounted_return, meter.total_s, meter.calls,
                   frames if keep_frames else None, keys if keep_frames else None)


def _run_episode_star(args):
    return run_episode(*args)


def collect_rollouts(env_spec: EnvSpec, pipeline: ObservationPipeline, policy: GaussianPolicy, count: int,
                     rng: np.random.Generator, workers: int = 1, horizon: Optional[int] = None,
                     deterministic: bool = False, episode_offset: int = 0) -> List[Rollout]:
    """
    Run `count` episodes, each with its own random stream spawned from one seed drawn from rng.
    With workers > 1 the episodes run on a process pool; results are always ordered by episode.

    :param env_spec:
    :param pipeline:
    :param policy:
    :param count:
    :param rng:
    :param workers:
    :param horizon: step limit per episode (defaults to the environment horizon)
    :param deterministic:
    :param episode_offset: id of the first episode
    :return:
    """
    horizon = env_spec.horizon if horizon is None else int(horizon)
    seeds = np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(count)
    jobs = [(env_spec, pipeline, policy, s, episode_offset + i, horizon, deterministic) for i, s in enumerate(seeds)]
    if workers > 1 and count > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_run_episode_star, jobs))
    return [run_episode(*job) for job in jobs]


def train(env_spec: EnvSpec, pipeline: ObservationPipeline, demos: DemoSet, rng: np.random.Generator,
          dapg_cfg: Optional[DapgConfig] = None, npg_cfg: Optional[NpgConfig] = None,
          gae_cfg: Optional[GaeConfig] = None, fit_cfg: Optional[FitConfig] = None,
          policy: Optional[GaussianPolicy] = None,
          observer: Optional[Callable[[IterationDiagnostics], None]] = None) -> TrainState:
    """
    Behavior-clone on the demonstrations, then run the configured number of demo-augmented
    natural gradient iterations. Each iteration collects rollouts, estimates advantages,
    computes the demo weight and the augmented gradient, takes the normalized step and refits
    the value function on the discounted returns.

    Environment and numerical faults abort with TrainingFaultError carrying the partial state;
    rejected steps are recorded and training continues.

    :param env_spec:
    :param pipeline:
    :param demos:
    :param rng:
    :param dapg_cfg:
    :param npg_cfg:
    :param gae_cfg:
    :param fit_cfg:
    :param policy: start from this policy instead of a fresh one
    :param observer: called with the diagnostics of every completed iteration
    :return:
    """
    dapg_cfg = dapg_cfg if dapg_cfg is not None else DapgConfig()
    npg_cfg = npg_cfg if npg_cfg is not None else NpgConfig()
    gae_cfg = gae_cfg if gae_cfg is not None else GaeConfig()
    fit_cfg = fit_cfg if fit_cfg is not None else FitConfig()
    demos = demos if demos is not None else DemoSet(tuple())

    observation_dim = pipeline.observation_dim(env_spec)
    if not demos.is_empty and (demos.observation_dim != observation_dim or demos.action_dim != action_dim(env_spec)):
        raise InvalidInputError("Demonstrations have dimensions ({}, {}), the environment yields ({}, {}).".format(
            demos.observation_dim, demos.action_dim, observation_dim, action_dim(env_spec)
        ))
    if policy is None:
        policy = GaussianPolicy.create(observation_dim, action_dim(env_spec), dapg_cfg.policy_hidden_sizes,
                                       seed=int(rng.integers(2 ** 31)), init_log_std=dapg_cfg.init_log_std)
    elif policy.observation_dim != observation_dim:
        raise InvalidInputError("The policy expects {} inputs, the pipeline yields {}.".format(
            policy.observation_dim, observation_dim
        ))
    vf = ValueFunction.create(observation_dim, fit_cfg, seed=int(rng.integers(2 ** 31)))

    bc_report = None
    if dapg_cfg.bc_epochs > 0 and not demos.is_empty:
        policy, bc_report = bc_pretrain(policy, demos, dapg_cfg, rng)
    state = TrainState(0, policy, vf, list(), bc_report)

    for _ in range(dapg_cfg.iterations):
        start = time.perf_counter()
        try:
            rollouts = collect_rollouts(env_spec, pipeline, state.policy, dapg_cfg.trajectories_per_iteration, rng,
                                        dapg_cfg.workers, dapg_cfg.horizon,
                                        episode_offset=state.k * dapg_cfg.trajectories_per_iteration)
        except Exception as e:
            log.error("Rollout collection failed in iteration {}: {}".format(state.k, e))
            raise TrainingFaultError("Rollout collection failed in iteration {}: {}".format(state.k, e), state) from e
        collected = time.perf_counter()

        try:
            diagnostics = _learn(state, rollouts, demos, dapg_cfg, npg_cfg, gae_cfg, rng)
        except NumericalFailureError as e:
            log.error("Numerical failure in iteration {}: {}".format(state.k, e))
            raise TrainingFaultError("Numerical failure in iteration {}: {}".format(state.k, e), state) from e
        except Exception as e:
            log.error("Learning failed in iteration {}: {}".format(state.k, e))
            raise TrainingFaultError("Learning failed in iteration {}: {}".format(state.k, e), state) from e
        finished = time.perf_counter()

        encode_s = sum(r.encode_s for r in rollouts)
        collect_s = collected - start
        if dapg_cfg.workers == 1:
            collect_s -= encode_s
        times = PhaseTimes(max(collect_s, 0.0), encode_s, finished - collected,
                           sum(r.encode_calls for r in rollouts))
        record = attr.evolve(diagnostics.record, wall_clock_s=finished - start, phase_times=times,
                             bc_loss=bc_report.final_loss if state.k == 0 and bc_report is not None else None)
        diagnostics = attr.evolve(diagnostics, record=record)
        state.metrics.append(record)
        state.k += 1

        log.info("Iteration {}: return {:.3f}, success {:.2f}, w {:.3e}, dtheta^T F dtheta {:.3e}, "
                 "cg residual {:.2e} ({} it), collect {:.2f}s, encode {:.2f}s, learn {:.2f}s.".format(
                     record.k, record.mean_return, record.success_rate, record.demo_weight, record.quadratic_form,
                     record.cg_residual, diagnostics.step_report.cg_iterations, times.collect_s, times.encode_s,
                     times.learn_s))
        if observer is not None:
            observer(diagnostics)

    return state


def _learn(state: TrainState, rollouts: Sequence[Rollout], demos: DemoSet, dapg_cfg: DapgConfig,
           npg_cfg: NpgConfig, gae_cfg: GaeConfig, rng: np.random.Generator) -> IterationDiagnostics:
    """
    The single-writer learning phase of one iteration. Updates state.policy and state.vf.
    """
    policy = state.policy
    trajectories = [r.trajectory for r in rollouts]
    advantages = batch_advantages(trajectories, state.vf, gae_cfg, dapg_cfg.standardize_advantages)
    batch = SampleBatch.from_trajectories(trajectories, advantages)

    raw_w = demo_weight(advantages, dapg_cfg, state.k)
    w = raw_w
    if dapg_cfg.clamp_demo_weight and raw_w < 0.0:
        log.warning("Negative demo weight {:.3e} in iteration {} clamped to zero.".format(raw_w, state.k))
        w = 0.0

    vanilla = policy_gradient(policy, batch)
    augmented = augmented_gradient(policy, batch, demos, w, dapg_cfg.demo_term)
    try:
        theta, step_report = npg_step(policy, augmented, batch, npg_cfg)
    except StepRejectedError as e:
        log.warning("Iteration {}: {}".format(state.k, e))
        theta, step_report = policy.theta, StepReport(StepStatus.Rejected, damping=npg_cfg.fisher_damping)

    returns = np.concatenate([discounted_return(t, gae_cfg.gamma) for t in trajectories])
    vf_report = fit(state.vf, batch.observations, returns, rng)
    state.policy = policy.with_theta(theta)

    record = IterationRecord(
        k=state.k,
        mean_return=float(np.mean([r.episode_return for r in rollouts])),
        success_rate=float(np.mean([r.success for r in rollouts])),
        demo_weight=w,
        quadratic_form=step_report.quadratic_form,
        cg_residual=step_report.cg_residual,
        wall_clock_s=0.0,
        step_status=step_report.status,
        vf_report=vf_report,
    )
    return IterationDiagnostics(record, vanilla, augmented, advantages, raw_w, w, step_report)
