# -*- coding: utf-8 -*-

"""
Natural policy gradient machinery: the sample policy gradient, the sampled Fisher
matrix applied to a vector, a conjugate-gradient solver and the normalized step

    theta' = theta + sqrt(delta / (g^T F^-1 g)) F^-1 g.

The Fisher matrix is never materialized: F v = (1/N) sum_t u_t (u_t^T v) + damping v
with u_t the score vector of sample t.
"""

import logging
import math
from typing import Callable, Optional, Tuple

import attr
import numpy as np

from .core import FlatVector, SampleBatch
from .data_abstractions import DataModel
from .exceptions import InvalidInputError, NumericalFailureError, StepRejectedError
from .policy import GaussianPolicy, BatchScores, score_weighted_sum
from .reports import StepReport, StepStatus
from .utilities import positive, non_negative

log = logging.getLogger(__name__)

LinearOperator = Callable[[FlatVector], FlatVector]

# Relative CG residual at and above which the solve is reported as unreliable.
MAX_CG_RESIDUAL = 1.0


@attr.s(frozen=True)
class NpgConfig(DataModel):
    step_size_delta = attr.ib(default=0.05, converter=float, validator=positive)
    cg_iterations = attr.ib(default=100, converter=int, validator=positive)
    cg_residual_tol = attr.ib(default=1e-10, converter=float, validator=non_negative)
    fisher_damping = attr.ib(default=1e-4, converter=float, validator=non_negative)


@attr.s(frozen=True)
class CgResult(object):
    x = attr.ib()
    iterations = attr.ib(converter=int)
    residual = attr.ib(converter=float)


def policy_gradient(policy: GaussianPolicy, batch: SampleBatch) -> FlatVector:
    """
    g = (1/N) sum_t grad log pi(a_t | s_t) * A_t over all samples of the batch.

    :param policy:
    :param batch:
    :return:
    """
    if batch is None or len(batch) == 0:
        raise InvalidInputError("The policy gradient needs a non-empty batch.")
    if batch.advantages is None:
        raise InvalidInputError("The batch carries no advantages.")
    total = score_weighted_sum(policy, batch.observations, batch.actions, batch.advantages)
    return total.scale(1.0 / len(batch))


def fisher_operator(policy: GaussianPolicy, samples: SampleBatch, damping: float) -> LinearOperator:
    """
    Bind policy, samples and damping into a linear operator v -> F v + damping * v.
    The forward pass over the samples runs once here; every application reuses it.

    :param policy:
    :param samples:
    :param damping:
    :return:
    """
    if samples is None or len(samples) == 0:
        raise InvalidInputError("The Fisher product needs a non-empty sample set.")
    scores = BatchScores.create(policy, samples.observations, samples.actions)
    count = len(scores)

    def apply(v: FlatVector) -> FlatVector:
        if v.dim != policy.theta_dim:
            raise InvalidInputError("v must have {} entries, got {}.".format(policy.theta_dim, v.dim))
        fv = scores.weighted_sum(scores.dot(v))
        return FlatVector(fv.values / count + damping * v.values)

    return apply


def fisher_vector_product(policy: GaussianPolicy, samples: SampleBatch, v: FlatVector,
                          damping: float = 0.0) -> FlatVector:
    """
    Return F v + damping * v for the sampled Fisher matrix of the given (observation, action) samples.

    :param policy:
    :param samples:
    :param v:
    :param damping:
    :return:
    """
    if v.dim != policy.theta_dim:
        raise InvalidInputError("v must have {} entries, got {}.".format(policy.theta_dim, v.dim))
    return fisher_operator(policy, samples, damping)(v)


def conjugate_gradient(apply_a: LinearOperator, b: FlatVector, cfg: NpgConfig) -> CgResult:
    """
    Solve A x = b for a symmetric positive definite operator. Stops once ||A x - b|| / ||b|| is at most
    cfg.cg_residual_tol or after cfg.cg_iterations iterations.

    :param apply_a:
    :param b:
    :param cfg:
    :return:
    """
    if not np.all(np.isfinite(b.values)):
        raise NumericalFailureError("The right-hand side is not finite.", iteration=0)
    b_norm = b.norm()
    if b_norm == 0.0:
        return CgResult(FlatVector.zeros(b.dim), 0, 0.0)

    x = np.zeros(b.dim)
    r = b.values.copy()
    p = r.copy()
    rr = float(r @ r)
    iterations = 0
    for i in range(1, cfg.cg_iterations + 1):
        ap = apply_a(FlatVector(p)).values
        p_ap = float(p @ ap)
        if not math.isfinite(p_ap) or p_ap <= 0.0:
            if not math.isfinite(p_ap):
                raise NumericalFailureError("Non-finite curvature in iteration {}.".format(i), iteration=i)
            # Exhausted the range of a semidefinite operator.
            break
        alpha = rr / p_ap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        iterations = i
        if not (np.all(np.isfinite(x)) and math.isfinite(rr_new)):
            raise NumericalFailureError("Non-finite iterate in iteration {}.".format(i), iteration=i)
        log.debug("CG iteration {}: relative residual {:.3e}.".format(i, math.sqrt(rr_new) / b_norm))
        if math.sqrt(rr_new) <= cfg.cg_residual_tol * b_norm:
            rr = rr_new
            break
        p = r + (rr_new / rr) * p
        rr = rr_new

    return CgResult(FlatVector(x), iterations, math.sqrt(rr) / b_norm)


def npg_step(policy: GaussianPolicy, g: FlatVector, samples: SampleBatch, cfg: NpgConfig,
             fisher: Optional[LinearOperator] = None) -> Tuple[FlatVector, StepReport]:
    """
    Take the normalized natural gradient step. Solves x = F^-1 g by conjugate gradients, sets
    dtheta = sqrt(delta / g^T x) * x and returns theta + dtheta with a step report whose
    quadratic_form is dtheta^T F dtheta.

    A zero gradient leaves theta unchanged (status ZeroGradient). If g^T x <= 0 the step is
    rejected with StepRejectedError.

    :param policy:
    :param g:
    :param samples:
    :param cfg:
    :param fisher: optional operator replacing the sampled Fisher matrix
    :return:
    """
    theta = policy.theta
    if g.dim != theta.dim:
        raise InvalidInputError("g must have {} entries, got {}.".format(theta.dim, g.dim))
    if g.is_zero():
        log.warning("Zero policy gradient; the policy is left unchanged.")
        return theta, StepReport(StepStatus.ZeroGradient, damping=cfg.fisher_damping)
    if fisher is None:
        if samples is None or len(samples) == 0:
            raise InvalidInputError("The natural gradient step needs a non-empty sample set.")
        fisher = fisher_operator(policy, samples, cfg.fisher_damping)

    solution = conjugate_gradient(fisher, g, cfg)
    if solution.residual >= MAX_CG_RESIDUAL:
        log.warning("Conjugate gradients ended at relative residual {:.3e} after {} iterations.".format(
            solution.residual, solution.iterations
        ))
    g_x = g.dot(solution.x)
    if not g_x > 0.0:
        raise StepRejectedError("g^T F^-1 g = {:.3e} is not positive; the step is rejected.".format(g_x))

    step = solution.x.scale(math.sqrt(cfg.step_size_delta / g_x))
    quadratic_form = step.dot(fisher(step))
    report = StepReport(StepStatus.Applied, quadratic_form, solution.residual, solution.iterations,
                        cfg.fisher_damping)
    return FlatVector(theta.values + step.values), report
