# -*- coding: utf-8 -*-

"""
Experiment orchestration: the run configuration, training runs with their artifacts,
the distractor evaluation protocol and scripted demonstration generation.
"""

import importlib.resources
import logging
import pathlib
from typing import Optional, Callable, Sequence, List

import attr
import matplotlib
import numpy as np
from attr.validators import instance_of

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .advantage import GaeConfig
from .baseline import FitConfig
from .core import DemoSet, Trajectory, Transition
from .dapg import DapgConfig, TrainState, IterationDiagnostics, train, collect_rollouts
from .data_abstractions import DataModel, section_lines, build_section
from .encoders import EncoderSpec, ObservationPipeline, create_pipeline
from .envs import EnvSpec, Distractor, make_env, action_dim
from .exceptions import ConfigError, ExpertFailureError, InvalidInputError, TrainingFaultError
from .npg import NpgConfig
from .parsers import ConfigParser
from .policy import GaussianPolicy
from .reports import IterationRecord, ModeResult, EvalReport
from .storage import CsvLog, read_trajectories, write_trajectories, write_checkpoint, write_frame, MANIFEST_FILE
from .utilities import digest_text

log = logging.getLogger(__name__)

CONFIG_FILE = "config.cfg"
METRICS_FILE = "metrics.csv"
COMPUTE_FILE = "compute.csv"
CHECKPOINT_FILE = "policy.ckpt"
CURVE_FILE = "learning_curve.svg"
EVAL_REPORT_FILE = "eval_report.csv"
EVAL_PLOT_FILE = "eval_report.svg"
FRAMES_FILE = "frames.csv"

COMPUTE_COLUMNS = ("k", "collect_s", "encode_s", "learn_s", "encode_calls")
EVAL_COLUMNS = ("mode", "rollouts", "success_rate", "mean_return")
DEFAULT_DEMO_COUNT = 25
ATTEMPT_FACTOR = 10
MAX_FAILURE_RATE = 0.5


@attr.s(frozen=True)
class RunSection(DataModel):
    seed = attr.ib(default=0, converter=int)
    demo_path = attr.ib(default="demos", validator=instance_of(str))
    output_dir = attr.ib(default="runs/default", validator=instance_of(str))


@attr.s(frozen=True)
class RunConfig(DataModel):
    """
    The complete configuration of a run. Its text form has one 'section.field = value' line per
    field in a fixed order; digest() hashes that canonical text.
    """
    version = "1.0.0"

    env = attr.ib(default=attr.Factory(EnvSpec), validator=instance_of(EnvSpec))
    encoder = attr.ib(default=attr.Factory(EncoderSpec), validator=instance_of(EncoderSpec))
    dapg = attr.ib(default=attr.Factory(DapgConfig), validator=instance_of(DapgConfig))
    npg = attr.ib(default=attr.Factory(NpgConfig), validator=instance_of(NpgConfig))
    gae = attr.ib(default=attr.Factory(GaeConfig), validator=instance_of(GaeConfig))
    vf = attr.ib(default=attr.Factory(FitConfig), validator=instance_of(FitConfig))
    run = attr.ib(default=attr.Factory(RunSection), validator=instance_of(RunSection))

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def demo_path(self) -> pathlib.Path:
        return pathlib.Path(self.run.demo_path)

    @property
    def output_dir(self) -> pathlib.Path:
        return pathlib.Path(self.run.output_dir)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        """
        Parse configuration text. Fields that are not mentioned keep their defaults.

        :param text:
        :return:
        """
        entries = ConfigParser.create().parse(text)
        sections = dict()
        for field in attr.fields(cls):
            sections[field.name] = build_section(field.default.factory, field.name, entries)
        if entries:
            key, (_, line) = sorted(entries.items(), key=lambda e: e[1][1])[0]
            raise ConfigError(key, "line {}: unknown field".format(line))
        return cls(**sections)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = pathlib.Path(path)
        if not path.is_file():
            raise ConfigError("config", "no configuration file at '{}'".format(path))
        return cls.from_text(path.read_text())

    @classmethod
    def packaged(cls, name: str) -> "RunConfig":
        """
        Load one of the configurations shipped with the package (e.g. 'state_reacher').

        :param name:
        :return:
        """
        resource = importlib.resources.files("dapgkit") / "resources" / "dapgkit" / "configs" / "{}.cfg".format(name)
        if not resource.is_file():
            raise ConfigError("config", "no packaged configuration named '{}'".format(name))
        return cls.from_text(resource.read_text())

    def to_text(self) -> str:
        lines = list()
        for field in attr.fields(type(self)):
            lines.extend(section_lines(field.name, getattr(self, field.name)))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        pathlib.Path(path).write_text(self.to_text())

    def digest(self) -> str:
        return digest_text(self.to_text())


def packaged_configs() -> List[str]:
    folder = importlib.resources.files("dapgkit") / "resources" / "dapgkit" / "configs"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".cfg"))


def resolve_config(reference: str) -> RunConfig:
    """
    Load a configuration from a file path or, failing that, a packaged configuration name.

    :param reference:
    :return:
    """
    if pathlib.Path(reference).is_file():
        return RunConfig.load(reference)
    if reference in packaged_configs():
        return RunConfig.packaged(reference)
    raise ConfigError("config", "no configuration file at '{}'".format(reference))


def load_demos(config: RunConfig) -> DemoSet:
    if not (config.demo_path / MANIFEST_FILE).is_file():
        raise ConfigError("run.demo_path", "no demonstrations at '{}'".format(config.demo_path))
    return read_trajectories(config.demo_path)


def run_training(config: RunConfig, observer: Optional[Callable[[IterationDiagnostics], None]] = None) -> TrainState:
    """
    Train from the configured demonstrations and write the run artifacts to the output directory:
    the canonical config, the per-iteration metrics and compute logs (written as training
    progresses), the final checkpoint and the learning curve.

    :param config:
    :param observer: also receives every iteration's diagnostics
    :return:
    """
    demos = load_demos(config)
    output_dir = config.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    config.save(output_dir / CONFIG_FILE)

    pipeline = create_pipeline(config.encoder, config.env, config.seed)
    encoder_digest = pipeline.encoder.digest()
    metrics = CsvLog.create(output_dir / METRICS_FILE, IterationRecord.csv_columns)
    compute = CsvLog.create(output_dir / COMPUTE_FILE, COMPUTE_COLUMNS)

    def record(diagnostics: IterationDiagnostics) -> None:
        r = diagnostics.record
        metrics.append(r.as_row())
        compute.append((r.k, r.phase_times.collect_s, r.phase_times.encode_s, r.phase_times.learn_s,
                        r.phase_times.encode_calls))
        if observer is not None:
            observer(diagnostics)

    log.info("Training on {} demonstrations ({} pairs), config digest {}.".format(
        len(demos), demos.pair_count, config.digest()
    ))
    rng = np.random.default_rng(config.seed)
    state = train(config.env, pipeline, demos, rng, config.dapg, config.npg, config.gae, config.vf, observer=record)

    if pipeline.encoder.digest() != encoder_digest:
        raise TrainingFaultError("The encoder parameters changed during training.", state)
    write_checkpoint(output_dir / CHECKPOINT_FILE, state.policy)
    plot_learning_curve(state.metrics, output_dir / CURVE_FILE)
    return state


def evaluate(policy: GaussianPolicy, config: RunConfig, modes: Sequence = ("none", ),
             rollouts: Optional[int] = None, pipeline: Optional[ObservationPipeline] = None) -> EvalReport:
    """
    Run `rollouts` deterministic episodes per distractor mode. Every mode replays the same
    episode seeds, so modes differ only in what the encoder sees.

    :param policy:
    :param config:
    :param modes: distractor mode names; 'none' is the clean run
    :param rollouts: defaults to dapg.eval_rollouts
    :param pipeline: defaults to the configured pipeline
    :return:
    """
    rollouts = config.dapg.eval_rollouts if rollouts is None else int(rollouts)
    if rollouts < 1:
        raise InvalidInputError("At least one evaluation rollout is required.")
    if pipeline is None:
        pipeline = create_pipeline(config.encoder, config.env, config.seed)
    observation_dim = pipeline.observation_dim(config.env)
    if policy.observation_dim != observation_dim or policy.action_dim != action_dim(config.env):
        raise InvalidInputError("The policy has dimensions ({}, {}), the environment yields ({}, {}).".format(
            policy.observation_dim, policy.action_dim, observation_dim, action_dim(config.env)
        ))

    results = list()
    for mode in modes:
        mode = Distractor.coerce(mode)
        env_spec = attr.evolve(config.env, distractors=config.env.distractors.with_modes((mode, )))
        rng = np.random.default_rng(config.seed)
        episodes = collect_rollouts(env_spec, pipeline, policy, rollouts, rng, config.dapg.workers,
                                    config.dapg.horizon, deterministic=True)
        result = ModeResult(mode.value, rollouts, np.mean([e.success for e in episodes]),
                            np.mean([e.episode_return for e in episodes]))
        log.info("Evaluation '{}': success {:.3f}, return {:.3f} over {} rollouts.".format(
            result.mode, result.success_rate, result.mean_return, rollouts
        ))
        results.append(result)
    return EvalReport(results)


def write_eval_report(report: EvalReport, directory) -> None:
    directory = pathlib.Path(directory)
    table = CsvLog.create(directory / EVAL_REPORT_FILE, EVAL_COLUMNS)
    for r in report.results:
        table.append((r.mode, r.rollouts, r.success_rate, r.mean_return))
    plot_eval_report(report, directory / EVAL_PLOT_FILE)


@attr.s(frozen=True, eq=False)
class ExpertEpisode(object):
    trajectory = attr.ib(validator=instance_of(Trajectory))
    success = attr.ib(converter=bool)
    frames = attr.ib(default=attr.Factory(list), repr=False)
    frame_keys = attr.ib(default=attr.Factory(list), repr=False)


def expert_episode(env_spec: EnvSpec, pipeline: ObservationPipeline, rng: np.random.Generator, episode: int,
                   keep_frames: bool = False) -> ExpertEpisode:
    """
    Roll out the scripted expert for one episode. Observations are assembled through the pipeline,
    so demonstrations live in the policy's input space; the stored log-probabilities are 0.

    :param env_spec:
    :param pipeline:
    :param rng:
    :param episode:
    :param keep_frames: also keep the rendered frames
    :return:
    """
    env = make_env(env_spec)
    step = env.reset(rng, episode=episode)
    observation = pipeline.observe(step, rng).assembled
    transitions, frames, keys = list(), list(), list()
    success = False
    while not step.done:
        if keep_frames:
            frames.append(env.render())
            keys.append(step.frame_key)
        action = env.expert_action()
        step = env.step(action)
        success = success or step.info["success"]
        next_observation = pipeline.observe(step, rng).assembled
        transitions.append(Transition(observation, action, step.reward, 0.0, False))
        observation = next_observation
    if keep_frames:
        frames.append(env.render())
        keys.append(step.frame_key)
    return ExpertEpisode(Trajectory(transitions, observation), success, frames, keys)


def generate_demos(config: RunConfig, count: int = DEFAULT_DEMO_COUNT, output_dir=None,
                   dump_frames=None) -> DemoSet:
    """
    Write `count` successful scripted-expert trajectories. Failed episodes are resampled; at most
    ATTEMPT_FACTOR * count episodes are tried and more than half of them may not fail.

    :param config:
    :param count:
    :param output_dir: defaults to run.demo_path
    :param dump_frames: directory for PNG frames of the kept episodes and their frames.csv index
    :return:
    """
    if count < 0:
        raise InvalidInputError("The demonstration count must be non-negative.")
    output_dir = config.demo_path if output_dir is None else pathlib.Path(output_dir)
    pipeline = attr.evolve(create_pipeline(config.encoder, config.env, config.seed), proprio_noise=0.0)
    rng = np.random.default_rng(config.seed)

    kept = list()
    attempts = failures = 0
    while len(kept) < count and attempts < ATTEMPT_FACTOR * count:
        episode = expert_episode(config.env, pipeline, rng, attempts, keep_frames=dump_frames is not None)
        attempts += 1
        if episode.success:
            kept.append(episode)
        else:
            failures += 1
            log.warning("Expert episode {} failed; resampling.".format(attempts - 1))
    if len(kept) < count or (attempts > 0 and failures / attempts > MAX_FAILURE_RATE):
        raise ExpertFailureError("The expert succeeded in {} of {} episodes ({} requested).".format(
            attempts - failures, attempts, count
        ))

    tag = "scripted_expert:{}".format(config.env.id)
    write_trajectories(output_dir, [e.trajectory for e in kept], tag,
                       observation_dim=pipeline.observation_dim(config.env), action_dim=action_dim(config.env))
    if dump_frames is not None:
        dump_episode_frames(kept, dump_frames)
    log.info("Wrote {} demonstrations to {} ({} attempts).".format(len(kept), output_dir, attempts))
    return DemoSet([e.trajectory for e in kept], tag)


def dump_episode_frames(episodes: Sequence[ExpertEpisode], directory) -> None:
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = CsvLog.create(directory / FRAMES_FILE, ("frame_key", "episode", "step", "file"))
    for e in episodes:
        for frame, key in zip(e.frames, e.frame_keys):
            episode, step = key.split(":")
            name = "frame_{}_{}.png".format(episode, step)
            write_frame(directory / name, frame)
            index.append((key, int(episode), int(step), name))


def plot_learning_curve(records: Sequence[IterationRecord], path) -> None:
    """
    Plot success rate and mean return against the iteration as an SVG.

    :param records:
    :param path:
    :return:
    """
    fig, (ax_success, ax_return) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
    k = [r.k for r in records]
    ax_success.plot(k, [r.success_rate for r in records], marker=".")
    ax_success.set_ylabel("success rate")
    ax_success.set_ylim(-0.05, 1.05)
    ax_return.plot(k, [r.mean_return for r in records], marker=".", color="tab:orange")
    ax_return.set_ylabel("mean return")
    ax_return.set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(str(path), format="svg")
    plt.close(fig)


def plot_eval_report(report: EvalReport, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(report.modes, [r.success_rate for r in report.results])
    ax.set_ylabel("success rate")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("{} rollouts per mode".format(report.results[0].rollouts if report.results else 0))
    fig.tight_layout()
    fig.savefig(str(path), format="svg")
    plt.close(fig)
