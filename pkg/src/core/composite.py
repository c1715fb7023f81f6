"""Convex-composite boosting: f = g + h with h known through value and prox.

Function-gap guarantees for composite problems are converted into
high-confidence ones by ``robust_gap``: two extraction passes, the first under
the Euclidean metric and the second under the linearized Bregman
pseudometric built from a robust estimate of grad g.  ``boost_ermc`` and
``boost_algc`` run the proximal continuation with ``robust_gap`` as the
cleanup (and, for streaming oracles, every) stage.
"""

import logging
import math
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.config import CHERNOFF_RATE, INNER_TOL, STAGE_INFLATION
from src.core.engine import MinimizationOracle, StageResult, delta_sequence, prox_boost
from src.core.erm import ErmProblem, erm, erm_r
from src.core.errors import ContractError, InvariantError
from src.core.oracles import deterministic_solve
from src.core.problem import (
    CompositeGroundTruth,
    CompositeProblem,
    Vector,
    composite_condition_number,
    with_proximal_term,
)
from src.core.records import Schedule, StageTrace
from src.core.robust import Pseudometric, euclidean, extract, linearized_bregman, robust_gradient
from src.core.rng import RngStream

# constants of the regularized-ERM driver
ERMC_STAGE = 54
ERMC_CLEANUP = 6
ERMC_CLEANUP_GAP = 222
ALGC_CLEANUP_GAP = 74

# (eps, rng) -> (point, samples) with P(gap <= eps) >= 2/3
GapOracle = Callable[[float, RngStream], Tuple[Vector, int]]


def odd_trials(m: int) -> int:
    if m < 1:
        raise ValueError(f"trial count must be positive, got {m}")
    return m if m % 2 else m + 1


def bregman_pseudometric(problem: CompositeProblem, grad_estimate: Vector) -> Pseudometric:
    return linearized_bregman(problem.nonsmooth_value, grad_estimate)


def proximal_subproblem(
    problem: CompositeProblem, lam: float, center: Vector, solve: bool = False
) -> CompositeProblem:
    """phi(y) = g(y) + h(y) + (lam/2)||y - center||^2 as a composite problem.

    With ``solve`` the exact minimizer is attached, found by the proximal
    inner solver.
    """
    smooth = with_proximal_term(problem.smooth, lam, center)
    mu = problem.combined_mu + lam
    truth = None
    if solve:
        x = deterministic_solve(
            smooth.value, smooth.grad, np.asarray(center, dtype=float), mu,
            lip=smooth.lip_grad, prox=problem.prox, tol=INNER_TOL,
        )
        truth = CompositeGroundTruth(
            minimizer=x, min_value=smooth.value(x) + problem.nonsmooth_value(x), grad_at_min=smooth.grad(x),
        )
    if lam == 0 and truth is None:
        truth = problem.ground_truth
    return CompositeProblem(
        smooth=smooth,
        nonsmooth_value=problem.nonsmooth_value,
        prox=problem.prox,
        combined_mu=mu,
        ground_truth=truth,
        name=f"{problem.name}+prox({lam:g})",
    )


def gap_gradient_accuracy(problem: CompositeProblem, eps: float) -> float:
    """kappa sqrt(mu eps): the gradient accuracy the second extraction needs."""
    return composite_condition_number(problem) * math.sqrt(problem.combined_mu * eps)


def robust_gap_select(candidates: Sequence[Vector], problem: CompositeProblem, grad_estimate: Vector) -> int:
    """Lowest index in I1 (euclidean extract) intersected with I2 (Bregman extract)."""
    first = extract(candidates, euclidean())
    second = extract(candidates, bregman_pseudometric(problem, grad_estimate))
    common = sorted(set(first) & set(second))
    if not common:
        raise InvariantError(f"extraction sets do not intersect: I1={first}, I2={second}")
    return common[0]


class GapEstimate(NamedTuple):
    point: Vector
    index: int
    samples: int          # oracle samples plus gradient draws
    gradient_samples: int


def robust_gap(
    oracle: GapOracle, m: int, eps: float, problem: CompositeProblem, rng: RngStream
) -> GapEstimate:
    """High-confidence composite gap estimate.

    With probability >= 1 - 2 exp(-m/18): ||x - x*|| <= 3 sqrt(2 eps / mu),
    D_h(x, x*) <= 65 kappa eps and f(x) - f* <= 74 kappa eps.  Oracle calls use
    children 0..m-1 of ``rng``; the gradient estimate uses child m.
    """
    if eps <= 0:
        raise ValueError(f"gap accuracy must be positive, got {eps}")
    m = odd_trials(m)
    candidates, samples = [], 0
    for k in range(m):
        point, used = oracle(eps, rng.child(k))
        candidates.append(np.asarray(point, dtype=float))
        samples += int(used)
    first = extract(candidates, euclidean())
    x_hat = candidates[first[0]]
    grad = robust_gradient(problem.smooth, x_hat, gap_gradient_accuracy(problem, eps), m, rng.child(m))
    index = robust_gap_select(candidates, problem, grad.estimate)
    logging.debug(f"robust gap: m={m}, selected {index}, gradient batch {grad.batch}")
    return GapEstimate(candidates[index], index, samples + grad.samples, grad.samples)


def robust_gap_gradient_draws(problem: CompositeProblem, eps: float, m: int) -> int:
    """m * ceil(3 sigma^2 / (kappa^2 mu eps))."""
    kappa = composite_condition_number(problem)
    return odd_trials(m) * max(1, math.ceil(3.0 * problem.sigma2 / (kappa ** 2 * problem.combined_mu * eps)))


# --- Regularized ERM ---

def ermc_stage_samples(lip_moment: float, mu: float, lam_prev: float, delta: float) -> int:
    """ceil(54 l^2 / ((mu + lambda_{j-1}) delta))."""
    return math.ceil(ERMC_STAGE * lip_moment ** 2 / ((mu + lam_prev) * delta))


def ermc_cleanup_accuracy(delta: float, mu: float, lip_grad: float, lam_T: float) -> float:
    """delta (mu + lambda_T) / (222 (L + lambda_T))."""
    return delta * (mu + lam_T) / (ERMC_CLEANUP_GAP * (lip_grad + lam_T))


def ermc_cleanup_samples(lip_moment: float, mu: float, lam_T: float, eps: float) -> int:
    return math.ceil(ERMC_CLEANUP * lip_moment ** 2 / ((mu + lam_T) * eps))


def boost_ermc(
    problem: ErmProblem,
    delta: float,
    T: int,
    m: int,
    rng: RngStream,
    lambdas: Optional[Sequence[float]] = None,
) -> Tuple[Vector, StageTrace]:
    """proxBoost with ERM-R stages and a RobustGap cleanup on the composite problem.

    Gap <= (1 + sum) delta with probability >= 1 - (T+3) exp(-m/18).
    """
    if problem.composite is None:
        raise ContractError(f"{problem.name}: regularized ERM needs a composite population problem")
    if problem.lip_moment is None:
        raise ContractError(f"{problem.name}: Lipschitz moment of the losses is unknown")
    comp, moment = problem.composite, problem.lip_moment
    mu, L = comp.combined_mu, comp.lip_grad
    m = odd_trials(m)
    lambdas = tuple(lambdas) if lambdas is not None else tuple(mu * 2.0 ** i for i in range(T + 1))
    schedule = Schedule(lambdas=lambdas, T=T, m=m, delta=delta, p=math.exp(-m / CHERNOFF_RATE), mu=mu)
    lam_T = lambdas[T]

    def stage(j: int, lam_prev: float, center: Vector, target: float, stream: RngStream) -> StageResult:
        if j <= T:
            est = erm_r(problem, ermc_stage_samples(moment, mu, lam_prev, delta), m, lam_prev, center, stream)
            return StageResult(est.point, est.samples)
        eps = ermc_cleanup_accuracy(delta, mu, L, lam_T)
        n = ermc_cleanup_samples(moment, mu, lam_T, eps)
        sub = proximal_subproblem(comp, lam_T, center)
        est = robust_gap(lambda _eps, s: (erm(problem, n, lam_T, center, s), n), m, eps, sub, stream)
        return StageResult(est.point, est.samples)

    return prox_boost(stage, schedule, rng, np.zeros(comp.dim), label="boost_ermc")


# --- Streaming proximal oracles ---

def boost_algc(
    alg: MinimizationOracle,
    problem: CompositeProblem,
    schedule: Schedule,
    delta_in: float,
    x_in: Vector,
    rng: RngStream,
) -> Tuple[Vector, StageTrace]:
    """Streaming composite proxBoost: every stage is a RobustGap at delta/9.

    Gap <= (1 + sum) delta with probability >= 1 - 2 (T+2) exp(-m/18).
    """
    if delta_in <= 0:
        raise ContractError(f"initial gap bound must be positive, got {delta_in}")
    mu, L, delta, T = problem.combined_mu, problem.lip_grad, schedule.delta, schedule.T
    m = odd_trials(schedule.m)
    bounds = delta_sequence(schedule.lambdas, delta, mu, L, delta_in, composite=True)
    lam_T = schedule.amplitude(T)

    def stage(j: int, lam_prev: float, center: Vector, target: float, stream: RngStream) -> StageResult:
        if j <= T:
            eps = delta / STAGE_INFLATION
        else:
            eps = delta * (mu + lam_T) / (ALGC_CLEANUP_GAP * (L + lam_T))
        sub = proximal_subproblem(problem, lam_prev, center)
        est = robust_gap(lambda e, s: alg(e, lam_prev, bounds[j], center, s), m, eps, sub, stream)
        return StageResult(est.point, est.samples, bounds[j])

    return prox_boost(stage, schedule, rng, x_in, label="boost_algc")
