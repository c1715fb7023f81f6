"""Proximal continuation driver and its streaming instantiations.

``prox_boost`` runs the three stages of the continuation (initialization,
proximal iterations, cleanup) around a user-supplied stage estimator.
``alg_r`` turns a minimization oracle into a robust distance estimator and
``boost_alg`` wires the two together with the initialization-bound updates
that streaming oracles need.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from src.config import CHERNOFF_RATE, STAGE_INFLATION
from src.core.errors import ContractError, StageError
from src.core.problem import ProblemInstance, Vector, condition_number, quadratic_minimizer
from src.core.records import Schedule, StageTrace
from src.core.robust import RobustEstimate, robust_distance_estimate
from src.core.rng import RngStream

# (delta, lam, delta_init, center, rng) -> (point, samples)
MinimizationOracle = Callable[[float, float, float, Vector, RngStream], Tuple[Vector, int]]


class StageResult(NamedTuple):
    point: Vector
    samples: int
    init_bound: Optional[float] = None


# (stage j, lambda_{j-1}, center x_{j-1}, target, rng) -> StageResult
StageEstimator = Callable[[int, float, Vector, float, RngStream], StageResult]


# --- Schedule arithmetic ---

def epsilon_schedule(delta: float, mu: float, lam: float) -> float:
    """eps_j = sqrt(2 delta / (mu + lambda_j))."""
    if delta < 0 or mu <= 0:
        raise ValueError(f"need delta >= 0 and mu > 0, got delta={delta}, mu={mu}")
    return math.sqrt(2.0 * delta / (mu + lam))


def geometric_factor(lambdas, mu: float) -> float:
    """1 + sum_{i=0}^{T} lambda_i / (mu + lambda_{i-1})."""
    total, previous = 1.0, 0.0
    for lam in lambdas:
        total += lam / (mu + previous)
        previous = lam
    return total


def stage_count(kappa: float) -> int:
    """T = ceil(log2 kappa)."""
    if kappa < 1:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    return max(0, math.ceil(math.log2(kappa) - 1e-12))


def trials_for(failure: float, stages: float = 1.0) -> int:
    """m = ceil(18 ln(stages / failure))."""
    if not 0.0 < failure < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {failure}")
    return max(1, math.ceil(CHERNOFF_RATE * math.log(stages / failure)))


# Geometric-decay parameter sets: (failure-union count as a function of T, delta denominator)
_VARIANTS = {
    "proxboost": (lambda T: 1.0, lambda T: 2 + 2 * T),
    "boost-alg": (lambda T: 2.0 + T, lambda T: 2 + 2 * T),
    "boost-erm": (lambda T: 2.0 + T, lambda T: 2 + 2 * T),
    "boost-ermc": (lambda T: 3.0 + T, lambda T: 4 + 2 * T),
    "boost-algc": (lambda T: 4.0 + 2 * T, lambda T: 2 + 2 * T),
}
COMPOSITE_VARIANT = "boost-algc"


def geometric_schedule(
    mu: float,
    lip_grad: float,
    eps_target: float,
    p: float,
    variant: str = "boost-alg",
    T: Optional[int] = None,
    m: Optional[int] = None,
) -> Schedule:
    """Geometric-decay parameters: T = ceil(log2 kappa), lambda_i = mu 2^i, delta = eps / (2 + 2T).

    ``variant`` selects the trial count: ``boost-alg`` uses m = ceil(18 ln((2+T)/p)),
    ``boost-algc`` uses m = ceil(18 ln((4+2T)/p)), ``proxboost`` treats p as a
    per-stage failure.  For ``boost-erm`` eps_target is the relative accuracy and
    delta is the per-stage gamma.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if lip_grad < mu or mu <= 0:
        raise ValueError(f"need lip_grad >= mu > 0, got mu={mu}, L={lip_grad}")
    if variant not in _VARIANTS:
        raise ValueError(f"unknown schedule variant {variant!r}")
    union, denom = _VARIANTS[variant]
    T = stage_count(lip_grad / mu) if T is None else int(T)
    m = trials_for(p, union(T)) if m is None else int(m)
    lambdas = tuple(mu * 2.0 ** i for i in range(T + 1))
    return Schedule(lambdas=lambdas, T=T, m=m, delta=eps_target / denom(T), p=p, mu=mu)


def total_oracle_calls(kappa: float, p: float, composite: bool = False) -> int:
    """Total oracle calls of the streaming geometric-decay drivers."""
    stages = math.ceil(2 + math.log2(kappa) - 1e-12)
    if composite:
        return trials_for(p, 4 + 2 * stage_count(kappa)) * stages
    return trials_for(p, stages) * stages


def init_bound_cap(kappa: float, eps: float, composite: bool = False) -> float:
    """Upper bound on max_j Delta_j under the geometric-decay parameters."""
    T = stage_count(kappa)
    lead = 9.0 * kappa if composite else kappa
    return (lead + 1 + 2 * T) / (2 + 2 * T) * eps


class CorollaryParams(NamedTuple):
    T: int
    m: int
    delta: float
    oracle_calls: int
    init_cap: Optional[float]


def corollary_params(kind: str, kappa: float, eps: float, p: float) -> CorollaryParams:
    """Geometric-decay parameters of one driver, with its total oracle calls.

    ``eps`` is the relative accuracy for ``boost-erm``.  The Delta cap is
    reported for the streaming drivers only.
    """
    schedule = geometric_schedule(1.0, kappa, eps, p, variant=kind)
    if kind in ("boost-alg", "boost-algc"):
        composite = kind == "boost-algc"
        calls = total_oracle_calls(kappa, p, composite)
        cap = init_bound_cap(kappa, eps, composite)
    else:
        calls, cap = schedule.m * (schedule.T + 2), None
    return CorollaryParams(schedule.T, schedule.m, schedule.delta, calls, cap)


def delta_sequence(
    lambdas, delta: float, mu: float, lip_grad: float, delta_in: float, composite: bool = False
) -> List[float]:
    """[Delta_{-1}, Delta_0, ..., Delta_T] of the streaming drivers.

    Delta_j = delta (c (L + lambda_{j-1}) / (mu + lambda_{j-1}) + sum_{i<j} lambda_i / (mu + lambda_{i-1}))
    with c = 1, or c = 9 for the composite driver.
    """
    lead = STAGE_INFLATION if composite else 1.0
    lams = [0.0] + list(lambdas)  # lams[j + 1] == lambda_j
    out = [float(delta_in)]
    running = 0.0
    for j in range(len(lambdas)):
        lam_prev = lams[j]
        out.append(delta * (lead * (lip_grad + lam_prev) / (mu + lam_prev) + running))
        running += lams[j + 1] / (mu + lam_prev)
    return out


# --- Drivers ---

def prox_boost(
    stage_estimator: StageEstimator,
    schedule: Schedule,
    rng: RngStream,
    x_in: Vector,
    exact_minimizer: Optional[Callable[[float, Vector], Vector]] = None,
    label: str = "proxboost",
) -> Tuple[Vector, StageTrace]:
    """Run stages 0..T+1 and return (x_{T+1}, trace).

    Stage j (0 <= j <= T) targets radius eps_{j-1} around the minimizer of
    f + (lambda_{j-1}/2)||. - x_{j-1}||^2; stage T+1 targets gap delta on f^T.
    ``exact_minimizer(lam, center)``, when given, fills the trace's verification column.
    """
    trace = StageTrace()
    center = np.array(x_in, dtype=float, copy=True)
    for j in range(schedule.T + 2):
        lam_prev = schedule.amplitude(j - 1)
        radius = schedule.radius(j - 1)
        target = radius if j <= schedule.T else schedule.delta
        try:
            result = stage_estimator(j, lam_prev, center, target, rng.child(j))
        except StageError:
            raise
        except Exception as exc:
            raise StageError(j, exc, label) from exc
        exact = exact_minimizer(lam_prev, center) if exact_minimizer is not None else None
        center = np.asarray(result.point, dtype=float)
        trace.add_stage(center, radius, lam_prev, result.samples, result.init_bound, exact)
        logging.debug(f"{label}: stage {j} lambda={lam_prev:g} samples={result.samples}")
    trace.check_complete(schedule.T)
    return center, trace


def alg_r(
    alg: MinimizationOracle,
    delta: float,
    lam: float,
    delta_init: float,
    center: Vector,
    m: int,
    rng: RngStream,
) -> RobustEstimate:
    """Robust distance estimator induced by ``alg`` on the proximal subproblem."""
    return robust_distance_estimate(
        lambda stream: alg(delta, lam, delta_init, center, stream), m, rng
    )


def quadratic_prox_minimizer(problem: ProblemInstance) -> Optional[Callable[[float, Vector], Vector]]:
    """Closed-form x_bar(lam, center) for quadratics, else None."""
    if not problem.is_quadratic:
        return None
    truth = problem.require_ground_truth()
    grad0 = problem.grad(np.zeros(problem.dim))

    def minimizer(lam: float, center: Vector) -> Vector:
        if lam == 0:
            return truth.minimizer
        return quadratic_minimizer(problem.hessian, grad0, lam, center)

    return minimizer


def boost_alg(
    alg: MinimizationOracle,
    problem: ProblemInstance,
    schedule: Schedule,
    delta_in: float,
    x_in: Vector,
    rng: RngStream,
) -> Tuple[Vector, StageTrace]:
    """Streaming proxBoost: Alg-R stages at delta/9 with updated initialization bounds."""
    if delta_in <= 0:
        raise ContractError(f"initial gap bound must be positive, got {delta_in}")
    mu, L, delta, T = problem.mu, problem.lip_grad, schedule.delta, schedule.T
    bounds = delta_sequence(schedule.lambdas, delta, mu, L, delta_in)
    lam_T = schedule.amplitude(T)

    def stage(j: int, lam_prev: float, center: Vector, target: float, stream: RngStream) -> StageResult:
        accuracy = delta / STAGE_INFLATION
        if j == T + 1:
            accuracy *= (mu + lam_T) / (L + lam_T)
        est = alg_r(alg, accuracy, lam_prev, bounds[j], center, schedule.m, stream)
        return StageResult(est.point, est.samples, bounds[j])

    return prox_boost(stage, schedule, rng, x_in, quadratic_prox_minimizer(problem), label="boost_alg")


def one_shot_robust(
    alg: MinimizationOracle,
    problem: ProblemInstance,
    eps: float,
    p: float,
    delta_in: float,
    x_in: Vector,
    rng: RngStream,
    m: Optional[int] = None,
) -> RobustEstimate:
    """Single robust distance estimate at oracle accuracy eps / (9 kappa)."""
    kappa = condition_number(problem)
    m = trials_for(p) if m is None else m
    return alg_r(alg, eps / (STAGE_INFLATION * kappa), 0.0, delta_in, x_in, m, rng)


# --- Error decomposition audit ---

@dataclass(frozen=True)
class DecompositionCheck:
    name: str
    stage: int
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class DecompositionReport:
    checks: Tuple[DecompositionCheck, ...]
    tol: float

    @property
    def ok(self) -> bool:
        return all(c.slack >= -self.tol * (1.0 + abs(c.rhs)) for c in self.checks)

    @property
    def worst_slack(self) -> float:
        return min(c.slack for c in self.checks)


def verify_error_decomposition(trace: StageTrace, problem: ProblemInstance, tol: float = 1e-9) -> DecompositionReport:
    """Check the inexact proximal point inequalities along a trace of a quadratic.

    Stage 0 against x_bar_0 = x*:
      initial:  f(x_0) - f* <= L/2 ||x_bar_0 - x_0||^2

    For j = 0..T with S_j = sum_{i<=j} (lambda_i/2)||x_bar_i - x_i||^2:
      value:    f^j(x_bar_{j+1}) - f* <= S_j
      progress: f(x_{j+1}) - f* <= f^j(x_{j+1}) - f^j(x_bar_{j+1}) + S_j
      smooth:   f(x_{j+1}) - f* <= (L + lambda_j)/2 ||x_bar_{j+1} - x_{j+1}||^2 + S_j
    """
    if not problem.is_quadratic:
        raise ContractError("error decomposition audit needs a quadratic problem")
    truth = problem.require_ground_truth()
    minimizer = quadratic_prox_minimizer(problem)
    f, f_star, L = problem.value, truth.min_value, problem.lip_grad
    xs = trace.centers
    T = len(xs) - 2
    lams = [trace.lambdas[j + 1] for j in range(T + 1)]  # lambda_0..lambda_T
    x_bars = [truth.minimizer] + [minimizer(lams[j], xs[j]) for j in range(T + 1)]

    def f_j(j, y):
        diff = y - xs[j]
        return f(y) + 0.5 * lams[j] * float(diff @ diff)

    checks = [DecompositionCheck(
        "initial", 0, f(xs[0]) - f_star, 0.5 * L * float(np.sum((x_bars[0] - xs[0]) ** 2))
    )]
    running = 0.0
    for j in range(T + 1):
        running += 0.5 * lams[j] * float(np.sum((x_bars[j] - xs[j]) ** 2))
        gap_next = f(xs[j + 1]) - f_star
        checks.append(DecompositionCheck("value", j, f_j(j, x_bars[j + 1]) - f_star, running))
        checks.append(DecompositionCheck(
            "progress", j, gap_next, f_j(j, xs[j + 1]) - f_j(j, x_bars[j + 1]) + running
        ))
        dist2 = float(np.sum((x_bars[j + 1] - xs[j + 1]) ** 2))
        checks.append(DecompositionCheck("smooth", j, gap_next, 0.5 * (L + lams[j]) * dist2 + running))
    return DecompositionReport(tuple(checks), tol)
