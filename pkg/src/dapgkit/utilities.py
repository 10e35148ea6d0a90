#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import collections
import logging
import re
import warnings
from typing import Optional, Iterable, Tuple, Any

import attr
import colorlog
import numpy as np
import xxhash

from .exceptions import InvalidInputError

__docformat__ = "restructuredtext"
FIRST_CAP_RE = re.compile(r"(.)([A-Z][a-z]+)")
ALL_CAP_RE = re.compile(r"([a-z0-9])([A-Z])")


def camelcase_to_underscore(name: str) -> str:
    """
    Convert CamelCase text to underscored_text.

    :param str name:
    :return:
    """
    s1 = FIRST_CAP_RE.sub(r"\1_\2", name)
    return ALL_CAP_RE.sub(r"\1_\2", s1).lower()


def as_vector(value: Any) -> np.ndarray:
    """
    Convert the input to a read-only, contiguous, one-dimensional float64 array.
    The input is copied, so later mutation of the source cannot leak in.

    :param value:
    :return:
    """
    vector = np.array(value, dtype=np.float64, copy=True).reshape(-1)
    vector.flags.writeable = False
    return vector


def as_frozen_array(value: Any) -> np.ndarray:
    """
    Convert the input to a read-only float64 array of arbitrary shape.

    :param value:
    :return:
    """
    array = np.array(value, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


def as_sizes(value: Any) -> Tuple[int, ...]:
    """
    Convert an iterable of counts (or a single count) to a tuple of int.

    :param value:
    :return:
    """
    if isinstance(value, (int, np.integer)):
        return (int(value), )
    return tuple(int(v) for v in value)


def check_finite(name: str, value: Any) -> None:
    """
    Raise InvalidInputError if the array-like contains NaN or infinite entries.

    :param name:
    :param value:
    :return:
    """
    if not np.all(np.isfinite(value)):
        raise InvalidInputError("'{}' must be finite.".format(name))


def digest_arrays(*arrays: Iterable[Any], tag: str = "") -> str:
    """
    Compute a stable xxh64 hex digest over the raw bytes of the given arrays (and an optional tag).

    :param arrays:
    :param tag:
    :return:
    """
    h = xxhash.xxh64()
    h.update(tag.encode("utf-8"))
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=np.float64)
        h.update(repr(a.shape).encode("utf-8"))
        h.update(a.astype("<f8").tobytes())
    return h.hexdigest()


def digest_text(text: str) -> str:
    """
    Compute the xxh64 hex digest of a text.

    :param text:
    :return:
    """
    return xxhash.xxh64(text.encode("utf-8")).hexdigest()


def get_log_level(verbose: int, debug: bool) -> int:
    """
    Determine the logging level from the verbose and debug flags.

    :param verbose:
    :param debug:
    :return:
    """
    if debug:
        log_level = logging.DEBUG
    else:
        if verbose is None or verbose == 0:
            log_level = logging.WARN
        elif verbose == 1:
            log_level = logging.INFO
        elif verbose >= 2:
            log_level = logging.DEBUG
        else:
            log_level = logging.WARN

    return log_level


def configure_logger(name: str, log_level: int, log_path: Optional[str] = None, with_warnings: Optional[bool] = True):
    """
    Configure the project logger of the specified name
    using colorlog.

    :param name:
    :param log_level:
    :param log_path:
    :param with_warnings:
    :return:
    """
    if log_path is not None:
        default_handler = logging.FileHandler(log_path)
        default_handler.setLevel(log_level)
        plain_formatter = logging.Formatter(
            "{asctime} {levelname:8s} @{name}: {message}",
            style="{"
        )
        default_handler.setFormatter(plain_formatter)
    else:
        default_handler = logging.StreamHandler()
        default_handler.setLevel(log_level)
        colored_formatter = colorlog.ColoredFormatter(
            "{log_color}{levelname:8s}{reset} @{white}{name}{reset}: {log_color}{message}{reset}",
            style="{"
        )
        default_handler.setFormatter(colored_formatter)

    # Configure the project logger
    project_logger = logging.getLogger(name)
    project_logger.setLevel(log_level)
    project_logger.addHandler(default_handler)

    py_warnings = None
    if with_warnings:
        # Configure the warnings logger
        warnings.simplefilter("default")
        logging.captureWarnings(True)
        py_warnings = logging.getLogger("py.warnings")
        py_warnings.setLevel(log_level)
        py_warnings.addHandler(default_handler)

    loggers = collections.namedtuple("loggers", ("project", "py_warnings"))
    return loggers(project_logger, py_warnings)


@attr.s(repr=False, slots=True)
class RangeValidator(object):
    low = attr.ib()
    high = attr.ib()
    low_inclusive = attr.ib(default=True)
    high_inclusive = attr.ib(default=True)

    def __call__(self, instance, attribute, value):
        above = value >= self.low if self.low_inclusive else value > self.low
        below = value <= self.high if self.high_inclusive else value < self.high
        if not (above and below):
            raise ValueError(
                "'{name}' must lie in {lb}{low}, {high}{rb} (got {value!r})."
                .format(name=attribute.name, low=self.low, high=self.high, value=value,
                        lb="[" if self.low_inclusive else "(", rb="]" if self.high_inclusive else ")")
            )

    def __repr__(self):
        return "<in_range validator for [{}, {}]>".format(self.low, self.high)


def in_range(low, high, low_inclusive=True, high_inclusive=True):
    """
    Return a validator that checks low <= value <= high (bounds optionally exclusive).
    To be used with attrs.

    :param low:
    :param high:
    :param low_inclusive:
    :param high_inclusive:
    :return:
    """
    return RangeValidator(low, high, low_inclusive, high_inclusive)


def positive(instance, attribute, value):
    """
    An attrs validator that requires a strictly positive number.
    """
    if not value > 0:
        raise ValueError("'{}' must be positive (got {!r}).".format(attribute.name, value))


def non_negative(instance, attribute, value):
    """
    An attrs validator that requires a non-negative number.
    """
    if not value >= 0:
        raise ValueError("'{}' must be non-negative (got {!r}).".format(attribute.name, value))
