#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
A collection of exceptions used by dapgkit.
"""


class InvalidInputError(Exception):
    """
    This exception indicates that an argument violates a dimension, shape or finiteness requirement.
    """
    pass


class NumericalFailureError(Exception):
    """
    This exception indicates that an iterative solver produced a non-finite intermediate value.
    """
    def __init__(self, message, iteration=None):
        super(NumericalFailureError, self).__init__(message)
        self.iteration = iteration


class StepRejectedError(Exception):
    """
    This exception is raised if the natural gradient step is numerically indefinite (g^T x <= 0).
    """
    pass


class ProtocolError(Exception):
    """
    This exception is raised if an environment is stepped after its episode has ended.
    """
    pass


class MissingFeatureError(KeyError):
    """
    This exception is raised if a feature table has no entry for the requested frame key.
    """
    pass


class SerializationError(Exception):
    """
    This exception indicates that the (de)-serialization of objects failed.
    """
    pass


class FormatError(SerializationError):
    """
    This exception indicates a malformed file. It records the offending line number (1-based) if known.
    """
    def __init__(self, message, line=None):
        if line is not None:
            message = "line {}: {}".format(line, message)
        super(FormatError, self).__init__(message)
        self.line = line


class ConfigError(Exception):
    """
    This exception indicates an invalid configuration value. It records the dotted field name.
    """
    def __init__(self, field, message):
        super(ConfigError, self).__init__("{}: {}".format(field, message))
        self.field = field


class ExpertFailureError(Exception):
    """
    This exception is raised if a scripted expert fails too often to produce the requested demonstrations.
    """
    pass


class TrainingFaultError(Exception):
    """
    This exception aborts training. It carries the partial training state.
    """
    def __init__(self, message, state=None):
        super(TrainingFaultError, self).__init__(message)
        self.state = state
