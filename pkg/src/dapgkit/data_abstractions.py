# -*- coding: utf-8 -*-

"""
Define data abstractions for configuration sections and stored artifacts.
"""

import enum
import json
import pathlib
from typing import Dict, Tuple, Any, List

import attr
from attr.validators import instance_of

from .exceptions import SerializationError, ConfigError


@attr.s
class DataModel(object):
    """
    The interface of a data abstraction class.
    """
    version = "1.0.0"

    @classmethod
    def from_dict(cls, **config):
        """
        Create an instance from a dictionary.

        :param config:
        :return:
        """
        return cls(**config)

    @classmethod
    def from_json(cls, file_path):
        """
        Create an instance from a JSON file.

        :param file_path:
        :return:
        """
        with pathlib.Path(file_path).open("r") as f:
            data = json.load(f)
            data_version = data.pop("version", None)
            if data_version is None or data_version != cls.version:
                raise SerializationError("Incompatible serialization format '{}' (expected '{}').".format(
                    data_version, cls.version
                ))
            return cls.from_dict(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = attr.asdict(self, recurse=True, retain_collection_types=False)
        data["version"] = self.version
        return data

    def to_json(self, file_path) -> None:
        with pathlib.Path(file_path).open("w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)


def format_value(value) -> str:
    """
    Render a configuration value in the canonical text form.

    :param value:
    :return:
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    elif isinstance(value, enum.Enum):
        return str(value.value)
    elif isinstance(value, int):
        return str(value)
    elif isinstance(value, float):
        return repr(value)
    elif isinstance(value, str):
        return '"{}"'.format(value.replace("\\", "\\\\").replace('"', '\\"'))
    elif isinstance(value, (tuple, list)):
        if len(value) == 0:
            return "()"
        return ", ".join(format_value(v) for v in value)
    else:
        raise TypeError("Cannot render configuration value {!r}.".format(value))


def _nested_model(field: attr.Attribute):
    default = field.default
    if isinstance(default, attr.Factory) and isinstance(default.factory, type) \
            and issubclass(default.factory, DataModel):
        return default.factory
    return None


def section_lines(prefix: str, model: DataModel) -> List[str]:
    """
    Emit one 'prefix.field = value' line per field, recursing into nested sections, in field order.

    :param prefix:
    :param model:
    :return:
    """
    lines = list()
    for field in attr.fields(type(model)):
        value = getattr(model, field.name)
        key = "{}.{}".format(prefix, field.name)
        if isinstance(value, DataModel):
            lines.extend(section_lines(key, value))
        else:
            lines.append("{} = {}".format(key, format_value(value)))
    return lines


def build_section(cls, prefix: str, entries: Dict[str, Tuple[Any, int]]):
    """
    Build a configuration section from parsed entries. Consumed keys are removed from entries.
    Every value is converted and validated individually so that errors name the dotted field.

    :param cls: the section class
    :param prefix: dotted section name
    :param entries: maps dotted keys to (value, line number)
    :return:
    """
    kwargs = dict()
    for field in attr.fields(cls):
        key = "{}.{}".format(prefix, field.name)
        nested = _nested_model(field)
        if nested is not None:
            if any(k.startswith(key + ".") for k in entries):
                kwargs[field.name] = build_section(nested, key, entries)
            continue
        if key not in entries:
            continue

        value, line = entries.pop(key)
        try:
            if field.converter is not None:
                value = field.converter(value)
            if field.validator is not None:
                field.validator(None, field, value)
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(key, "line {}: {}".format(line, e))
        kwargs[field.name] = value

    try:
        return cls(**kwargs)
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(prefix, str(e))


@attr.s(frozen=True)
class TrajectoryManifest(DataModel):
    """
    The index of a trajectory directory.
    """
    version = "1.0.0"

    files = attr.ib(converter=tuple)
    observation_dim = attr.ib(converter=int)
    action_dim = attr.ib(converter=int)
    source_tag = attr.ib(default="", validator=instance_of(str))
    terminal_observations = attr.ib(default=attr.Factory(tuple), converter=tuple)

    @terminal_observations.validator
    def _check_terminals(self, attribute, value):
        if len(value) != len(self.files):
            raise SerializationError("The manifest lists {} files but {} terminal observations.".format(
                len(self.files), len(value)
            ))

    def to_dict(self):
        return {
            "version": self.version,
            "files": list(self.files),
            "observation_dim": self.observation_dim,
            "action_dim": self.action_dim,
            "source_tag": self.source_tag,
            "terminal_observations": [list(t) for t in self.terminal_observations],
        }
