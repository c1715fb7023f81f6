"""Empirical risk minimization as a weak distance oracle, and its boosted forms.

``erm`` minimizes the regularized empirical risk of n fresh samples exactly,
``erm_r`` amplifies it by robust selection over m replicas, and
``boost_erm`` embeds ``erm_r`` in the proximal continuation with the
stage sample sizes n_j.
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np

from src.config import CHERNOFF_RATE, INNER_MAX_ITER, INNER_TOL
from src.core.engine import StageResult, geometric_factor, prox_boost, quadratic_prox_minimizer
from src.core.errors import ContractError, InvariantError
from src.core.oracles import deterministic_solve
from src.core.problem import CompositeProblem, ProblemInstance, Vector
from src.core.records import Schedule, StageTrace
from src.core.robust import RobustEstimate, robust_distance_estimate
from src.core.rng import RngStream

ERM_CONSTANT = 432
ERM_RADIUS_CONSTANT = 96

Batch = Any  # sampler output, interpreted only by the problem's own loss maps


@dataclass(frozen=True)
class ErmProblem:
    """Nonnegative per-sample losses f(x, z) with population objective ``population``.

    ``sampler(gen, n)`` draws n i.i.d. samples as an opaque batch;
    ``sample_loss`` / ``sample_loss_grad`` evaluate the batch mean.
    ``normal_equations(batch) -> (H, r)`` is set when the empirical risk is the
    quadratic 0.5 y'Hy - r'y + const, enabling an exact linear solve.
    ``composite`` (with ``lip_moment``) describes the population problem g + h
    for the regularized variant; its ``prox`` is applied inside every ERM solve.
    """

    population: ProblemInstance
    sampler: Callable[[np.random.Generator, int], Batch]
    sample_loss: Callable[[Vector, Batch], float]
    sample_loss_grad: Callable[[Vector, Batch], Vector]
    lip_grad_hat: float
    n_min: int
    normal_equations: Optional[Callable[[Batch], Tuple[np.ndarray, np.ndarray]]] = None
    composite: Optional[CompositeProblem] = None
    lip_moment: Optional[float] = None
    name: str = "erm"

    def __post_init__(self):
        if self.population.mu <= 0:
            raise InvariantError("population loss must be strongly convex")
        if self.population.lip_grad > self.lip_grad_hat * (1 + 1e-12):
            raise InvariantError(
                f"population smoothness {self.population.lip_grad} exceeds per-sample {self.lip_grad_hat}"
            )
        if self.n_min < 1:
            raise InvariantError(f"N must be positive, got {self.n_min}")
        truth = self.population.require_ground_truth()
        if self.composite is None and truth.min_value <= 0:
            raise ContractError(f"relative-error guarantees need f* > 0, got {truth.min_value}")

    @property
    def dim(self) -> int:
        return self.population.dim

    @property
    def mu(self) -> float:
        return self.population.mu

    @property
    def lip_grad(self) -> float:
        return self.population.lip_grad

    @property
    def kappa_hat(self) -> float:
        return self.lip_grad_hat / self.mu

    @property
    def min_value(self) -> float:
        return self.population.require_ground_truth().min_value


def erm(problem: ErmProblem, n: int, lam: float, center: Vector, rng: RngStream) -> Vector:
    """Minimizer of (1/n) sum f(y, z_i) + (lam/2)||y - center||^2 over n fresh samples."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    batch = problem.sampler(rng.gen, int(n))
    c = np.asarray(center, dtype=float)
    prox = problem.composite.prox if problem.composite is not None else None
    if problem.normal_equations is not None and prox is None:
        H, r = problem.normal_equations(batch)
        return np.linalg.solve(H + lam * np.eye(problem.dim), r + lam * c)

    def value(y):
        diff = y - c
        return problem.sample_loss(y, batch) + 0.5 * lam * float(diff @ diff)

    def grad(y):
        return problem.sample_loss_grad(y, batch) + lam * (y - c)

    return deterministic_solve(
        value, grad, c, problem.mu + lam, lip=problem.lip_grad_hat + lam,
        prox=prox, tol=INNER_TOL, max_iter=INNER_MAX_ITER,
    )


def erm_r(problem: ErmProblem, n: int, m: int, lam: float, center: Vector, rng: RngStream) -> RobustEstimate:
    """m independent ERM replicas followed by robust selection."""
    return robust_distance_estimate(lambda stream: (erm(problem, n, lam, center, stream), n), m, rng)


def sample_count(gamma: float, j: int, mu: float, lip_hat: float, lambdas: Sequence[float], n_min: int) -> int:
    """Stage sample size n_j (n_{-1} for j = -1)."""
    if gamma <= 0:
        raise ValueError(f"relative accuracy must be positive, got {gamma}")
    if j < 0:
        return math.ceil(ERM_CONSTANT * lip_hat / (gamma * mu))
    lam_j = lambdas[j]
    factor = geometric_factor(lambdas[: j + 1], mu) - 1.0
    n = ERM_CONSTANT * math.ceil((lip_hat + lam_j) / (mu + lam_j) * (1.0 / gamma + factor))
    return max(n, n_min)


def cleanup_sample_count(problem: ErmProblem, lam_T: float, n_T: int) -> int:
    return math.ceil((problem.lip_grad + lam_T) / (problem.mu + lam_T) * n_T)


def boost_erm_sample_total(problem: ErmProblem, gamma: float, lambdas: Sequence[float], m: int) -> int:
    """m * (sum_{j=-1}^{T-1} n_j + ceil((L + lambda_T)/(mu + lambda_T) n_T))."""
    T = len(lambdas) - 1
    sizes = [sample_count(gamma, j, problem.mu, problem.lip_grad_hat, lambdas, problem.n_min) for j in range(-1, T + 1)]
    return m * (sum(sizes[:-1]) + cleanup_sample_count(problem, lambdas[T], sizes[-1]))


def boost_erm(
    problem: ErmProblem,
    gamma: float,
    T: int,
    m: int,
    rng: RngStream,
    lambdas: Optional[Sequence[float]] = None,
) -> Tuple[Vector, StageTrace]:
    """proxBoost over ERM-R stages; f(x) <= (1 + (1 + sum) gamma) f* w.p. >= 1 - (T+2) exp(-m/18)."""
    f_star = problem.min_value
    if f_star <= 0:
        raise ContractError(f"relative-error guarantees need f* > 0, got {f_star}")
    mu, lip_hat = problem.mu, problem.lip_grad_hat
    lambdas = tuple(lambdas) if lambdas is not None else tuple(mu * 2.0 ** i for i in range(T + 1))
    schedule = Schedule(
        lambdas=lambdas, T=T, m=m, delta=gamma * f_star, p=math.exp(-m / CHERNOFF_RATE), mu=mu,
    )

    def stage(j: int, lam_prev: float, center: Vector, target: float, stream: RngStream) -> StageResult:
        if j <= T:
            n = sample_count(gamma, j - 1, mu, lip_hat, lambdas, problem.n_min)
        else:
            n_T = sample_count(gamma, T, mu, lip_hat, lambdas, problem.n_min)
            n = cleanup_sample_count(problem, lambdas[T], n_T)
        est = erm_r(problem, n, m, lam_prev, center, stream)
        return StageResult(est.point, est.samples)

    return prox_boost(
        stage, schedule, rng, np.zeros(problem.dim),
        quadratic_prox_minimizer(problem.population), label="boost_erm",
    )


def empirical_risk_bound(problem: ErmProblem, n: int, lam: float = 0.0, center: Optional[Vector] = None) -> float:
    """Radius sqrt(96 L_hat_eff f*_prox / (n mu_eff^2)) met by one ERM w.p. >= 2/3."""
    if lam == 0:
        f_prox = problem.min_value
    else:
        minimizer = quadratic_prox_minimizer(problem.population)
        if minimizer is None:
            raise ContractError("prox-regularized bound needs a quadratic population objective")
        c = np.asarray(center, dtype=float)
        y = minimizer(lam, c)
        f_prox = problem.population.value(y) + 0.5 * lam * float(np.sum((y - c) ** 2))
    return math.sqrt(ERM_RADIUS_CONSTANT * (problem.lip_grad_hat + lam) * f_prox / (n * (problem.mu + lam) ** 2))


def erm_baseline_samples(kappa_hat: float, kappa: float, gamma: float, p: float, n_min: int) -> int:
    """Direct robust-ERM sample count ceil(18 ln(1/p)) * max(ceil(432 kappa_hat kappa / gamma), N)."""
    m = math.ceil(CHERNOFF_RATE * math.log(1.0 / p))
    return m * max(math.ceil(ERM_CONSTANT * kappa_hat * kappa / gamma), n_min)
