"""Problem types shared by every algorithm.

A ``ProblemInstance`` is a smooth strongly convex objective with exact and
stochastic gradient access; a ``CompositeProblem`` adds a closed convex
nonsmooth part ``h`` reachable only through its value and proximal map.
Both are immutable once built and safe to share between threads.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from src.core.errors import ContractError, InvariantError

Vector = np.ndarray
ValueFn = Callable[[Vector], float]
GradFn = Callable[[Vector], Vector]
StochGradFn = Callable[[Vector, np.random.Generator], Vector]
StochGradBatchFn = Callable[[Vector, np.random.Generator, int], Vector]
ProxFn = Callable[[Vector, float], Vector]


@dataclass(frozen=True)
class GroundTruth:
    minimizer: Vector
    min_value: float


@dataclass(frozen=True)
class CompositeGroundTruth:
    minimizer: Vector
    min_value: float
    grad_at_min: Vector  # gradient of the smooth part at the minimizer


@dataclass(frozen=True)
class ProblemInstance:
    """Smooth objective with constants ``mu``, ``lip_grad`` and variance bound ``sigma2``.

    ``hessian`` is set only for quadratics; it enables closed-form proximal
    minimizers used by the verification suites.  ``stoch_grad_batch(x, gen, s)``,
    when set, returns the mean of ``s`` stochastic gradients at a cost that
    does not grow with ``s``.
    """

    dim: int
    value: ValueFn
    grad: GradFn
    stoch_grad: StochGradFn
    mu: float
    lip_grad: float
    sigma2: float
    ground_truth: Optional[GroundTruth] = None
    hessian: Optional[np.ndarray] = field(default=None, repr=False)
    name: str = "problem"
    stoch_grad_batch: Optional[StochGradBatchFn] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvariantError(f"dim must be positive, got {self.dim}")
        if self.mu < 0 or self.lip_grad <= 0:
            raise InvariantError(f"invalid constants mu={self.mu}, L={self.lip_grad}")
        if self.lip_grad < self.mu:
            raise InvariantError(
                f"gradient Lipschitz constant {self.lip_grad} is below strong convexity {self.mu}"
            )
        if self.sigma2 < 0 or not np.isfinite(self.sigma2):
            raise InvariantError(f"variance bound must be finite and nonnegative, got {self.sigma2}")

    @property
    def is_quadratic(self) -> bool:
        return self.hessian is not None

    def mean_stoch_grad(self, x: Vector, gen: np.random.Generator, s: int) -> Vector:
        """Mean of ``s`` independent stochastic gradients at ``x``."""
        if s < 1:
            raise ValueError(f"batch size must be positive, got {s}")
        if self.stoch_grad_batch is not None:
            return self.stoch_grad_batch(x, gen, s)
        total = self.stoch_grad(x, gen)
        for _ in range(s - 1):
            total = total + self.stoch_grad(x, gen)
        return total / s

    def require_ground_truth(self) -> GroundTruth:
        if self.ground_truth is None:
            raise ContractError(f"{self.name}: operation needs a known minimizer")
        return self.ground_truth


def condition_number(problem: ProblemInstance) -> float:
    """kappa = L / mu."""
    if problem.mu <= 0 or problem.lip_grad < problem.mu:
        raise InvariantError(
            f"condition number undefined for mu={problem.mu}, L={problem.lip_grad}"
        )
    return problem.lip_grad / problem.mu


def quadratic_minimizer(hessian: np.ndarray, grad_at_zero: Vector, lam: float, center: Vector) -> Vector:
    """Minimizer of 0.5 y'Hy + <g0, y> + (lam/2)||y - center||^2."""
    d = hessian.shape[0]
    return np.linalg.solve(hessian + lam * np.eye(d), lam * center - grad_at_zero)


def with_proximal_term(problem: ProblemInstance, lam: float, center: Vector) -> ProblemInstance:
    """The proximal subproblem phi(y) = f(y) + (lam/2)||y - center||^2.

    Gradients and stochastic gradients are shifted by ``lam (y - center)``;
    constants become ``mu + lam`` and ``L + lam``.  For quadratics the exact
    minimizer and minimum are attached as ground truth.
    """
    if lam < 0:
        raise ValueError(f"proximal amplitude must be nonnegative, got {lam}")
    if lam == 0:
        return problem
    c = np.array(center, dtype=float, copy=True)
    f_value, f_grad, f_stoch = problem.value, problem.grad, problem.stoch_grad

    def value(y):
        diff = y - c
        return f_value(y) + 0.5 * lam * float(diff @ diff)

    def grad(y):
        return f_grad(y) + lam * (y - c)

    def stoch_grad(y, gen):
        return f_stoch(y, gen) + lam * (y - c)

    stoch_grad_batch = None
    if problem.stoch_grad_batch is not None:
        f_batch = problem.stoch_grad_batch

        def stoch_grad_batch(y, gen, s):
            return f_batch(y, gen, s) + lam * (y - c)

    truth = None
    hessian = None
    if problem.is_quadratic:
        hessian = problem.hessian + lam * np.eye(problem.dim)
        y_star = quadratic_minimizer(problem.hessian, f_grad(np.zeros(problem.dim)), lam, c)
        truth = GroundTruth(minimizer=y_star, min_value=value(y_star))

    return ProblemInstance(
        dim=problem.dim,
        value=value,
        grad=grad,
        stoch_grad=stoch_grad,
        mu=problem.mu + lam,
        lip_grad=problem.lip_grad + lam,
        sigma2=problem.sigma2,
        ground_truth=truth,
        hessian=hessian,
        name=f"{problem.name}+prox({lam:g})",
        stoch_grad_batch=stoch_grad_batch,
    )


def two_sided_bounds(problem: ProblemInstance, x: Vector) -> Tuple[float, float, float]:
    """(mu/2 ||x - x*||^2, f(x) - f*, L/2 ||x - x*||^2)."""
    truth = problem.require_ground_truth()
    dist2 = float(np.sum((x - truth.minimizer) ** 2))
    gap = problem.value(x) - truth.min_value
    return 0.5 * problem.mu * dist2, gap, 0.5 * problem.lip_grad * dist2


@dataclass(frozen=True)
class CompositeProblem:
    """f = g + h with g smooth (``smooth``) and h given by value and prox.

    ``combined_mu`` is the strong convexity of g + h; ``smooth.mu`` may be 0.
    """

    smooth: ProblemInstance
    nonsmooth_value: ValueFn
    prox: ProxFn
    combined_mu: float
    ground_truth: Optional[CompositeGroundTruth] = None
    name: str = "composite"

    def __post_init__(self):
        if self.combined_mu <= 0:
            raise InvariantError(f"combined strong convexity must be positive, got {self.combined_mu}")
        if self.smooth.lip_grad < self.combined_mu:
            raise InvariantError("smooth part Lipschitz constant below combined strong convexity")

    @property
    def dim(self) -> int:
        return self.smooth.dim

    @property
    def lip_grad(self) -> float:
        return self.smooth.lip_grad

    @property
    def sigma2(self) -> float:
        return self.smooth.sigma2

    def value(self, x: Vector) -> float:
        h = self.nonsmooth_value(x)
        if not np.isfinite(h):
            return float("inf")
        return self.smooth.value(x) + h

    def require_ground_truth(self) -> CompositeGroundTruth:
        if self.ground_truth is None:
            raise ContractError(f"{self.name}: operation needs a known minimizer")
        return self.ground_truth


def composite_condition_number(problem: CompositeProblem) -> float:
    return problem.lip_grad / problem.combined_mu


def bregman_gap(problem: CompositeProblem, x: Vector) -> float:
    """D_h(x, x*) = h(x) - h(x*) + <grad g(x*), x - x*>."""
    truth = problem.require_ground_truth()
    hx = problem.nonsmooth_value(x)
    if not np.isfinite(hx):
        return float("inf")
    return hx - problem.nonsmooth_value(truth.minimizer) + float(truth.grad_at_min @ (x - truth.minimizer))


def composite_two_sided_bounds(problem: CompositeProblem, x: Vector) -> Tuple[float, float, float]:
    """(D_h + mu/2 ||x - x*||^2, f(x) - f*, D_h + L/2 ||x - x*||^2)."""
    truth = problem.require_ground_truth()
    dist2 = float(np.sum((x - truth.minimizer) ** 2))
    dh = bregman_gap(problem, x)
    gap = problem.value(x) - truth.min_value
    return dh + 0.5 * problem.combined_mu * dist2, gap, dh + 0.5 * problem.lip_grad * dist2
