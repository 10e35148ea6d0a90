# -*- coding: utf-8 -*-

"""The following classes encapsulate the reports and records produced by the learners."""

import enum

import attr
from attr.validators import instance_of


@attr.s(frozen=True)
class FitReport(object):
    initial_mse = attr.ib(converter=float)
    final_mse = attr.ib(converter=float)


@attr.s(frozen=True)
class BcReport(object):
    initial_loss = attr.ib(converter=float)
    final_loss = attr.ib(converter=float)
    epochs = attr.ib(default=0, converter=int)


class StepStatus(enum.Enum):
    Applied = "applied"
    ZeroGradient = "zero_gradient"
    Rejected = "rejected"


@attr.s(frozen=True)
class StepReport(object):
    status = attr.ib(validator=instance_of(StepStatus))
    quadratic_form = attr.ib(default=0.0, converter=float)
    cg_residual = attr.ib(default=0.0, converter=float)
    cg_iterations = attr.ib(default=0, converter=int)
    damping = attr.ib(default=0.0, converter=float)


@attr.s(frozen=True)
class PhaseTimes(object):
    """
    Seconds per phase of one iteration. With a single worker collect_s excludes encoding. With
    parallel workers encoding runs inside them, so encode_s is summed worker time and collect_s
    is the wall time of collection.
    """
    collect_s = attr.ib(default=0.0, converter=float)
    encode_s = attr.ib(default=0.0, converter=float)
    learn_s = attr.ib(default=0.0, converter=float)
    encode_calls = attr.ib(default=0, converter=int)


@attr.s(frozen=True)
class IterationRecord(object):
    """
    Metrics of one completed training iteration.
    """
    k = attr.ib(converter=int)
    mean_return = attr.ib(converter=float)
    success_rate = attr.ib(converter=float)
    demo_weight = attr.ib(converter=float)
    quadratic_form = attr.ib(converter=float)
    cg_residual = attr.ib(converter=float)
    wall_clock_s = attr.ib(converter=float)
    step_status = attr.ib(default=StepStatus.Applied, validator=instance_of(StepStatus))
    vf_report = attr.ib(default=None)
    phase_times = attr.ib(default=attr.Factory(PhaseTimes), validator=instance_of(PhaseTimes))
    bc_loss = attr.ib(default=None, converter=attr.converters.optional(float))

    csv_columns = ("k", "mean_return", "success_rate", "demo_weight", "quadratic_form", "cg_residual",
                   "wall_clock_s")

    def as_row(self):
        return tuple(getattr(self, c) for c in self.csv_columns)


@attr.s(frozen=True)
class ModeResult(object):
    mode = attr.ib(validator=instance_of(str))
    rollouts = attr.ib(converter=int)
    success_rate = attr.ib(converter=float)
    mean_return = attr.ib(converter=float)


@attr.s(frozen=True)
class EvalReport(object):
    results = attr.ib(converter=tuple)

    def __getitem__(self, mode):
        for r in self.results:
            if r.mode == mode:
                return r
        raise KeyError(mode)

    @property
    def modes(self):
        return tuple(r.mode for r in self.results)
