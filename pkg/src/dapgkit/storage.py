# -*- coding: utf-8 -*-

"""
Reading and writing of run artifacts: trajectory directories (one CSV per trajectory plus a
JSON manifest), binary policy checkpoints, metric logs, feature tables and frame images.
"""

import csv
import logging
import pathlib
import struct
from typing import Sequence, Dict, Iterable, List, Optional

import attr
import numpy as np
import PIL.Image
from attr.validators import instance_of

from .core import Trajectory, DemoSet, FlatVector
from .data_abstractions import TrajectoryManifest
from .exceptions import SerializationError, FormatError
from .nnet import MlpSpec, MlpParams, Activation
from .policy import GaussianPolicy

log = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
TRAJECTORY_FILE = "trajectory_{:04d}.csv"

CHECKPOINT_MAGIC = b"DAPGCKPT"
CHECKPOINT_VERSION = 1
CHECKPOINT_HEADER = struct.Struct("<8sHIIH")
ACTIVATION_CODES = {Activation.Tanh: 0}


def trajectory_columns(observation_dim: int, action_dim: int) -> List[str]:
    return (["t"] + ["obs_{}".format(i) for i in range(observation_dim)] +
            ["act_{}".format(i) for i in range(action_dim)] + ["reward", "log_prob", "done"])


def write_trajectories(directory, trajectories: Sequence[Trajectory], source_tag: str = "",
                       observation_dim: Optional[int] = None, action_dim: Optional[int] = None) -> TrajectoryManifest:
    """
    Write every trajectory to its own CSV file and index them in a manifest. The dimensions are
    taken from the trajectories; pass them explicitly to write an empty set.

    :param directory:
    :param trajectories:
    :param source_tag:
    :param observation_dim:
    :param action_dim:
    :return:
    """
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    trajectories = list(trajectories)
    if trajectories:
        observation_dim, action_dim = trajectories[0].observation_dim, trajectories[0].action_dim
    observation_dim = 0 if observation_dim is None else observation_dim
    action_dim = 0 if action_dim is None else action_dim

    files = list()
    for i, trajectory in enumerate(trajectories):
        name = TRAJECTORY_FILE.format(i)
        with (directory / name).open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(trajectory_columns(observation_dim, action_dim))
            for t, tr in enumerate(trajectory):
                writer.writerow([t] + [repr(float(v)) for v in tr.observation] + [repr(float(v)) for v in tr.action] +
                                [repr(tr.reward), repr(tr.log_prob), int(tr.done)])
        files.append(name)

    manifest = TrajectoryManifest(files, observation_dim, action_dim, source_tag,
                                  [[float(v) for v in t.terminal_observation] for t in trajectories])
    manifest.to_json(directory / MANIFEST_FILE)
    log.debug("Wrote {} trajectories to {}.".format(len(files), directory))
    return manifest


def read_trajectories(directory) -> DemoSet:
    """
    Load a trajectory directory written by write_trajectories.

    :param directory:
    :return:
    """
    directory = pathlib.Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.is_file():
        raise FileNotFoundError("No trajectory manifest at '{}'.".format(manifest_path))
    manifest = TrajectoryManifest.from_json(manifest_path)
    columns = trajectory_columns(manifest.observation_dim, manifest.action_dim)
    n, m = manifest.observation_dim, manifest.action_dim

    trajectories = list()
    for name, terminal in zip(manifest.files, manifest.terminal_observations):
        with (directory / name).open("r", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != columns:
                raise FormatError("{}: unexpected columns {}".format(name, header), line=1)
            rows = list()
            for line, row in enumerate(reader, start=2):
                if len(row) != len(columns):
                    raise FormatError("{}: expected {} fields, got {}".format(name, len(columns), len(row)), line=line)
                try:
                    values = [float(v) for v in row[1:-1]]
                    done = bool(int(row[-1]))
                except ValueError as e:
                    raise FormatError("{}: {}".format(name, e), line=line)
                rows.append((values, done, line))
        if not rows:
            raise FormatError("{}: the trajectory is empty".format(name), line=2)
        for _, done, line in rows[:-1]:
            if done:
                raise FormatError("{}: done flag before the last row".format(name), line=line)
        values = np.array([r[0] for r in rows], dtype=np.float64)
        trajectories.append(Trajectory.from_arrays(
            values[:, :n], values[:, n:n + m], values[:, n + m], values[:, n + m + 1], terminal, rows[-1][1]
        ))
    return DemoSet(trajectories, manifest.source_tag)


def write_checkpoint(path, policy: GaussianPolicy) -> None:
    """
    Write the policy as: header (magic, version, input dim, output dim, hidden layer count),
    the hidden sizes, the activation code, the tail length, then the little-endian float64
    network parameters followed by the log standard deviations.

    :param path:
    :param policy:
    :return:
    """
    spec = policy.spec
    with pathlib.Path(path).open("wb") as f:
        f.write(CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, spec.input_dim, spec.output_dim,
                                       len(spec.hidden_sizes)))
        f.write(struct.pack("<{}I".format(len(spec.hidden_sizes)), *spec.hidden_sizes))
        f.write(struct.pack("<BI", ACTIVATION_CODES[spec.activation], policy.log_std.shape[0]))
        f.write(policy.mean_params.values.astype("<f8").tobytes())
        f.write(policy.log_std.astype("<f8").tobytes())


def read_checkpoint(path) -> GaussianPolicy:
    """
    Read a policy checkpoint written by write_checkpoint.

    :param path:
    :return:
    """
    data = pathlib.Path(path).read_bytes()
    try:
        magic, version, input_dim, output_dim, n_hidden = CHECKPOINT_HEADER.unpack_from(data, 0)
        offset = CHECKPOINT_HEADER.size
        hidden_sizes = struct.unpack_from("<{}I".format(n_hidden), data, offset)
        offset += 4 * n_hidden
        activation_code, tail_length = struct.unpack_from("<BI", data, offset)
        offset += 5
    except struct.error as e:
        raise SerializationError("Truncated checkpoint header: {}".format(e))
    if magic != CHECKPOINT_MAGIC:
        raise SerializationError("'{}' is not a policy checkpoint.".format(path))
    if version != CHECKPOINT_VERSION:
        raise SerializationError("Incompatible checkpoint version {} (expected {}).".format(version, CHECKPOINT_VERSION))
    activations = {v: k for k, v in ACTIVATION_CODES.items()}
    if activation_code not in activations:
        raise SerializationError("Unknown activation code {}.".format(activation_code))

    spec = MlpSpec(input_dim, hidden_sizes, output_dim, activations[activation_code])
    expected = 8 * (spec.parameter_count + tail_length)
    if len(data) - offset != expected or tail_length != output_dim:
        raise SerializationError("The checkpoint body has {} bytes, expected {}.".format(len(data) - offset, expected))
    values = np.frombuffer(data, dtype="<f8", offset=offset).astype(np.float64)
    split = spec.parameter_count
    return GaussianPolicy(spec, MlpParams(FlatVector(values[:split])), values[split:])


@attr.s
class CsvLog(object):
    """
    An append-only CSV file with a fixed header. Every row is flushed when written.
    """
    path = attr.ib(converter=pathlib.Path)
    columns = attr.ib(converter=tuple)
    _rows = attr.ib(default=0, validator=instance_of(int))

    @classmethod
    def create(cls, path, columns) -> "CsvLog":
        """
        Create the file (truncating an existing one) and write the header.

        :param path:
        :param columns:
        :return:
        """
        log_file = cls(path, columns)
        log_file.path.parent.mkdir(parents=True, exist_ok=True)
        with log_file.path.open("w", newline="") as f:
            csv.writer(f).writerow(log_file.columns)
        return log_file

    def append(self, row: Iterable) -> None:
        row = tuple(row)
        if len(row) != len(self.columns):
            raise ValueError("Expected {} values, got {}.".format(len(self.columns), len(row)))
        with self.path.open("a", newline="") as f:
            csv.writer(f).writerow([repr(v) if isinstance(v, float) else v for v in row])
        self._rows += 1

    def __len__(self):
        return self._rows


def read_csv(path) -> List[Dict[str, str]]:
    with pathlib.Path(path).open("r", newline="") as f:
        return list(csv.DictReader(f))


def write_feature_table(path, table: Dict[str, np.ndarray], feature_dim: int,
                        metadata: Optional[Dict[str, str]] = None) -> None:
    """
    Write a feature table: the header 'feature_dim=<d>' (followed by optional key=value
    metadata) and one 'episode,step,v_0,...' row per frame key, sorted by episode and step.

    :param path:
    :param table: maps "episode:step" keys to feature vectors
    :param feature_dim:
    :param metadata:
    :return:
    """
    def order(key):
        episode, step = key.split(":")
        return int(episode), int(step)

    header = "feature_dim={}".format(feature_dim)
    if metadata:
        header += " " + " ".join("{}={}".format(k, v) for k, v in sorted(metadata.items()))
    with pathlib.Path(path).open("w") as f:
        f.write(header + "\n")
        for key in sorted(table, key=order):
            vector = np.asarray(table[key], dtype=np.float64)
            if vector.shape != (feature_dim, ):
                raise ValueError("Feature '{}' does not have {} entries.".format(key, feature_dim))
            episode, step = order(key)
            f.write(",".join([str(episode), str(step)] + [repr(float(v)) for v in vector]) + "\n")


def write_frame(path, frame: np.ndarray) -> None:
    """
    Save a grayscale frame in [0, 1] as an 8-bit PNG.

    :param path:
    :param frame:
    :return:
    """
    pixels = np.round(np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    PIL.Image.fromarray(pixels).save(str(path), format="PNG")
