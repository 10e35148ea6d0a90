# -*- coding: utf-8 -*-

"""
A small fully-connected network with analytic forward, reverse and forward-mode passes
over a flat parameter vector, and the Adam update used to fit it by regression.

Parameter layout (stable): layer by layer, the weight matrix of shape (fan_out, fan_in)
in row-major order, followed by the fan_out biases. Hidden layers use tanh, the output
layer is linear.
"""

import enum
import math
from typing import Tuple, List

import attr
import numpy as np
from attr.validators import instance_of

from .core import FlatVector
from .exceptions import InvalidInputError
from .utilities import as_sizes, check_finite, positive, in_range


class Activation(enum.Enum):
    Tanh = "tanh"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        elif isinstance(value, str):
            try:
                return cls(value.lower())
            except ValueError:
                raise ValueError("Activation '{}' is not known.".format(value))
        else:
            raise ValueError("Activation '{}' is not known.".format(value))


def _all_positive(instance, attribute, value):
    if isinstance(value, tuple):
        bad = [v for v in value if v < 1]
    else:
        bad = [value] if value < 1 else []
    if bad:
        raise ValueError("'{}' must only contain dimensions >= 1 (got {!r}).".format(attribute.name, value))


@attr.s(frozen=True)
class MlpSpec(object):
    input_dim = attr.ib(converter=int, validator=_all_positive)
    hidden_sizes = attr.ib(converter=as_sizes, validator=_all_positive)
    output_dim = attr.ib(converter=int, validator=_all_positive)
    activation = attr.ib(default=Activation.Tanh, converter=Activation.coerce, validator=instance_of(Activation))

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        """
        Return (fan_in, fan_out) for every layer.

        :return:
        """
        sizes = (self.input_dim, ) + self.hidden_sizes + (self.output_dim, )
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def parameter_count(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes)

    def unflatten(self, flat: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        """
        Return views (W, b) into the flat parameter array for every layer.

        :param flat:
        :return:
        """
        if flat.shape != (self.parameter_count, ):
            raise InvalidInputError("Expected {} parameters, got {}.".format(self.parameter_count, flat.shape))
        layers = list()
        offset = 0
        for fan_in, fan_out in self.layer_shapes:
            w = flat[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = flat[offset:offset + fan_out]
            offset += fan_out
            layers.append((w, b))
        return layers


@attr.s(frozen=True)
class MlpParams(object):
    flat = attr.ib(validator=instance_of(FlatVector))

    @classmethod
    def zeros(cls, spec: MlpSpec) -> "MlpParams":
        return cls(FlatVector.zeros(spec.parameter_count))

    @classmethod
    def initialize(cls, spec: MlpSpec, seed: int, output_scale: float = 1.0) -> "MlpParams":
        """
        Draw weights uniformly from (-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
        The output layer weights are multiplied by output_scale.

        :param spec:
        :param seed:
        :param output_scale:
        :return:
        """
        rng = np.random.default_rng(seed)
        chunks = list()
        last = len(spec.layer_shapes) - 1
        for i, (fan_in, fan_out) in enumerate(spec.layer_shapes):
            s = 1.0 / math.sqrt(fan_in)
            weights = rng.uniform(-s, s, size=fan_in * fan_out)
            chunks.append(output_scale * weights if i == last else weights)
            chunks.append(np.zeros(fan_out))
        return cls(FlatVector(np.concatenate(chunks)))

    @property
    def values(self) -> np.ndarray:
        return self.flat.values


def _check_params(spec: MlpSpec, params: MlpParams) -> None:
    if params.flat.dim != spec.parameter_count:
        raise InvalidInputError("Parameter vector has {} entries, the layout requires {}.".format(
            params.flat.dim, spec.parameter_count
        ))


def _as_batch(name: str, value, width: int) -> np.ndarray:
    batch = np.asarray(value, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != width:
        raise InvalidInputError("'{}' must have shape (N, {}), got {}.".format(name, width, batch.shape))
    return batch


def _activations(spec: MlpSpec, params: MlpParams, inputs: np.ndarray) -> List[np.ndarray]:
    """
    Return the list [x, h_1, ..., h_L] of layer outputs (the last one linear).
    """
    layers = spec.unflatten(params.values)
    outputs = [inputs]
    h = inputs
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        h = np.tanh(z) if i < len(layers) - 1 else z
        outputs.append(h)
    return outputs


def forward_batch(spec: MlpSpec, params: MlpParams, inputs) -> np.ndarray:
    """
    Evaluate the network on every row of inputs.

    :param spec:
    :param params:
    :param inputs: array of shape (N, input_dim)
    :return: array of shape (N, output_dim)
    """
    _check_params(spec, params)
    inputs = _as_batch("inputs", inputs, spec.input_dim)
    return _activations(spec, params, inputs)[-1]


@attr.s(frozen=True, eq=False)
class Linearization(object):
    """
    The layer outputs of one forward pass over a batch. Forward-mode (jvp) and reverse (vjp)
    passes at the same inputs and parameters reuse them instead of re-running the network.
    """
    spec = attr.ib(validator=instance_of(MlpSpec))
    params = attr.ib(validator=instance_of(MlpParams))
    activations = attr.ib(validator=instance_of(list), repr=False)

    @classmethod
    def create(cls, spec: MlpSpec, params: MlpParams, inputs) -> "Linearization":
        """
        Run the forward pass and keep every layer output.

        :param spec:
        :param params:
        :param inputs: array of shape (N, input_dim)
        :return:
        """
        _check_params(spec, params)
        inputs = _as_batch("inputs", inputs, spec.input_dim)
        return cls(spec, params, _activations(spec, params, inputs))

    @property
    def outputs(self) -> np.ndarray:
        return self.activations[-1]

    @property
    def rows(self) -> int:
        return self.activations[0].shape[0]

    def jvp(self, direction: FlatVector) -> np.ndarray:
        """
        The derivative of the outputs with respect to the parameters, along direction.

        :param direction: parameter-space direction
        :return: array of shape (N, output_dim)
        """
        if direction.dim != self.spec.parameter_count:
            raise InvalidInputError("The direction must have {} entries.".format(self.spec.parameter_count))
        layers = self.spec.unflatten(self.params.values)
        tangents = self.spec.unflatten(direction.values)
        last = len(layers) - 1
        dh = None
        for i, ((w, _), (dw, db)) in enumerate(zip(layers, tangents)):
            dz = self.activations[i] @ dw.T + db
            if dh is not None:
                dz += dh @ w.T
            dh = (1.0 - self.activations[i + 1] ** 2) * dz if i < last else dz
        return dh

    def vjp(self, output_grads) -> Tuple[FlatVector, np.ndarray]:
        """
        The parameter gradient of sum_n output_grads[n] . f(inputs[n]), summed over rows,
        and the per-row input gradients.

        :param output_grads: array of shape (N, output_dim)
        :return:
        """
        output_grads = _as_batch("output_grads", output_grads, self.spec.output_dim)
        if output_grads.shape[0] != self.rows:
            raise InvalidInputError("inputs and output_grads have different row counts.")
        layers = self.spec.unflatten(self.params.values)
        grads = [None] * len(layers)
        delta = output_grads
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grads[i] = (delta.T @ self.activations[i], delta.sum(axis=0))
            delta = delta @ w
            if i > 0:
                delta = delta * (1.0 - self.activations[i] ** 2)

        flat = np.concatenate([np.concatenate((gw.reshape(-1), gb)) for gw, gb in grads])
        return FlatVector(flat), delta


def backward_batch(spec: MlpSpec, params: MlpParams, inputs, output_grads) -> Tuple[FlatVector, np.ndarray]:
    """
    Reverse pass. Returns the parameter gradient of sum_n output_grads[n] . f(inputs[n]),
    summed over rows, and the per-row input gradients.

    :param spec:
    :param params:
    :param inputs: array of shape (N, input_dim)
    :param output_grads: array of shape (N, output_dim)
    :return:
    """
    return Linearization.create(spec, params, inputs).vjp(output_grads)


def jvp_batch(spec: MlpSpec, params: MlpParams, inputs, direction: FlatVector) -> np.ndarray:
    """
    Forward-mode pass: the derivative of the outputs with respect to the parameters, along direction.

    :param spec:
    :param params:
    :param inputs: array of shape (N, input_dim)
    :param direction: parameter-space direction
    :return: array of shape (N, output_dim)
    """
    return Linearization.create(spec, params, inputs).jvp(direction)


def forward(spec: MlpSpec, params: MlpParams, input) -> np.ndarray:
    """
    Evaluate the network on a single input vector.

    :param spec:
    :param params:
    :param input:
    :return:
    """
    x = np.asarray(input, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec.input_dim:
        raise InvalidInputError("Expected an input of length {}, got shape {}.".format(spec.input_dim, x.shape))
    check_finite("input", x)
    return forward_batch(spec, params, x[np.newaxis, :])[0]


def backward(spec: MlpSpec, params: MlpParams, input, output_grad) -> Tuple[FlatVector, np.ndarray]:
    """
    Reverse pass for a single input: gradients of output_grad . f(input) with respect to
    the parameters and the input.

    :param spec:
    :param params:
    :param input:
    :param output_grad:
    :return:
    """
    x = np.asarray(input, dtype=np.float64)
    g = np.asarray(output_grad, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec.input_dim:
        raise InvalidInputError("Expected an input of length {}, got shape {}.".format(spec.input_dim, x.shape))
    if g.ndim != 1 or g.shape[0] != spec.output_dim:
        raise InvalidInputError("Expected an output gradient of length {}, got shape {}.".format(
            spec.output_dim, g.shape
        ))
    param_grad, input_grad = backward_batch(spec, params, x[np.newaxis, :], g[np.newaxis, :])
    return param_grad, input_grad[0]


@attr.s
class Adam(object):
    """
    Adam updates of a flat parameter vector with bias-corrected first and second moment estimates.
    The moments persist across calls to step(), so one instance serves one optimization run.
    """
    learning_rate = attr.ib(converter=float, validator=positive)
    beta1 = attr.ib(default=0.9, converter=float, validator=in_range(0.0, 1.0, high_inclusive=False))
    beta2 = attr.ib(default=0.999, converter=float, validator=in_range(0.0, 1.0, high_inclusive=False))
    epsilon = attr.ib(default=1e-8, converter=float, validator=positive)
    _m = attr.ib(default=None, init=False, repr=False)
    _v = attr.ib(default=None, init=False, repr=False)
    _t = attr.ib(default=0, init=False)

    @property
    def steps(self) -> int:
        return self._t

    def step(self, values: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """
        Return values moved against grad.

        :param values:
        :param grad:
        :return:
        """
        values = np.asarray(values, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != values.shape:
            raise InvalidInputError("The gradient has shape {}, the parameters {}.".format(grad.shape, values.shape))
        if self._m is None:
            self._m = np.zeros_like(values)
            self._v = np.zeros_like(values)
        elif self._m.shape != values.shape:
            raise InvalidInputError("The parameter shape changed between Adam steps.")

        self._t += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad ** 2
        m_hat = self._m / (1.0 - self.beta1 ** self._t)
        v_hat = self._v / (1.0 - self.beta2 ** self._t)
        return values - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
