"""Synthetic problem generators with exact ground truth.

Every generator is deterministic given its seed: the rotation, minimizer and
finite population are drawn from ``derive_rng(seed, [GENERATOR_STREAM])`` so
that regenerating a problem reproduces it bit for bit.  Generated problems are
checked against their two-sided bounds before they are returned.
"""

import logging
import math
from enum import Enum
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import linalg, optimize

from src.config import (
    COMPOSITE_DISPLACEMENT,
    CONDITIONING_MIN_RATIO,
    DEFAULT_DOF,
    ERM_NMIN_FACTOR,
    GRAD_CHUNK,
    GROUND_TRUTH_TOL,
    INNER_MAX_ITER,
)
from src.core.erm import ErmProblem
from src.core.errors import ContractError, InvariantError
from src.core.oracles import deterministic_solve, gradient_mapping
from src.core.problem import (
    CompositeGroundTruth,
    CompositeProblem,
    GroundTruth,
    ProblemInstance,
    ProxFn,
    ValueFn,
    Vector,
    composite_two_sided_bounds,
    two_sided_bounds,
)
from src.core.rng import derive_rng
from src.core.smoothing import ScalarLoss, smoothed_loss

GENERATOR_STREAM = 0


class Tail(str, Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"


class ConstraintKind(str, Enum):
    BALL = "ball"
    BOX = "box"
    L1 = "l1"


# --- Noise ---

def noise_sampler(dim: int, sigma: float, tail: Union[str, Tail] = Tail.GAUSSIAN, dof: float = DEFAULT_DOF):
    """gen -> xi with E xi = 0 and E ||xi||^2 = sigma^2, i.i.d. across coordinates."""
    tail = Tail(tail)
    if sigma < 0:
        raise ValueError(f"noise level must be nonnegative, got {sigma}")
    scale = sigma / math.sqrt(dim)
    if tail == Tail.GAUSSIAN:
        return lambda gen: scale * gen.standard_normal(dim)
    if dof <= 2:
        raise ValueError(f"student_t noise needs dof > 2 for finite variance, got {dof}")
    t_scale = scale * math.sqrt((dof - 2.0) / dof)
    return lambda gen: t_scale * gen.standard_t(dof, size=dim)


def noise_mean_sampler(dim: int, sigma: float, tail: Union[str, Tail] = Tail.GAUSSIAN, dof: float = DEFAULT_DOF):
    """(gen, s) -> mean of s draws of ``noise_sampler(dim, sigma, tail, dof)``.

    The gaussian mean is drawn directly; student-t draws are summed in chunks
    of ``GRAD_CHUNK`` scalars so memory stays bounded for large s.
    """
    tail = Tail(tail)
    if sigma < 0:
        raise ValueError(f"noise level must be nonnegative, got {sigma}")
    scale = sigma / math.sqrt(dim)
    if tail == Tail.GAUSSIAN:
        return lambda gen, s: (scale / math.sqrt(s)) * gen.standard_normal(dim)
    if dof <= 2:
        raise ValueError(f"student_t noise needs dof > 2 for finite variance, got {dof}")
    t_scale = scale * math.sqrt((dof - 2.0) / dof)

    def mean(gen, s):
        rows = max(1, GRAD_CHUNK // dim)
        total = np.zeros(dim)
        left = s
        while left > 0:
            k = min(left, rows)
            total += gen.standard_t(dof, size=(k, dim)).sum(axis=0)
            left -= k
        return (t_scale / s) * total

    return mean


# --- Smooth quadratics ---

def quadratic_instance(
    hessian: np.ndarray,
    minimizer: Vector,
    sigma: float = 0.0,
    tail: Union[str, Tail] = Tail.GAUSSIAN,
    dof: float = DEFAULT_DOF,
    offset: float = 0.0,
    mu: Optional[float] = None,
    lip_grad: Optional[float] = None,
    name: str = "quadratic",
) -> ProblemInstance:
    """f(x) = 0.5 (x - x*)' A (x - x*) + offset with additive gradient noise.

    ``mu`` and ``lip_grad`` default to the extreme eigenvalues of A.
    """
    A = np.atleast_2d(np.asarray(hessian, dtype=float))
    x_star = np.atleast_1d(np.asarray(minimizer, dtype=float))
    dim = x_star.shape[0]
    if mu is None or lip_grad is None:
        eig = linalg.eigvalsh(A)
        mu = float(eig[0]) if mu is None else mu
        lip_grad = float(eig[-1]) if lip_grad is None else lip_grad
    noise = noise_sampler(dim, sigma, tail, dof)
    noise_mean = noise_mean_sampler(dim, sigma, tail, dof)

    def value(x):
        diff = x - x_star
        return 0.5 * float(diff @ A @ diff) + offset

    def grad(x):
        return A @ (x - x_star)

    def stoch_grad(x, gen):
        return A @ (x - x_star) + noise(gen)

    def stoch_grad_batch(x, gen, s):
        return A @ (x - x_star) + noise_mean(gen, s)

    return ProblemInstance(
        dim=dim,
        value=value,
        grad=grad,
        stoch_grad=stoch_grad,
        mu=float(mu),
        lip_grad=float(lip_grad),
        sigma2=float(sigma) ** 2,
        ground_truth=GroundTruth(minimizer=x_star, min_value=float(offset)),
        hessian=A,
        name=name,
        stoch_grad_batch=stoch_grad_batch,
    )


def _rotation(gen: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(gen.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _rotated_hessian(gen: np.random.Generator, d: int, mu: float, lip_grad: float) -> np.ndarray:
    spectrum = np.geomspace(mu, lip_grad, d) if d > 1 else np.array([mu])
    Q = _rotation(gen, d)
    A = (Q * spectrum) @ Q.T
    return 0.5 * (A + A.T)


def make_quadratic(
    d: int,
    mu: float,
    lip_grad: float,
    sigma: float,
    tail: Union[str, Tail] = Tail.GAUSSIAN,
    seed: int = 0,
    dof: float = DEFAULT_DOF,
) -> ProblemInstance:
    """Rotated quadratic with spectrum log-spaced in [mu, L]; total noise variance sigma^2."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if not 0 < mu <= lip_grad:
        raise ValueError(f"need lip_grad >= mu > 0, got mu={mu}, L={lip_grad}")
    gen = derive_rng(seed, [GENERATOR_STREAM]).gen
    A = _rotated_hessian(gen, d, mu, lip_grad)
    x_star = gen.standard_normal(d)
    problem = quadratic_instance(
        A, x_star, sigma, tail, dof, mu=mu, lip_grad=lip_grad,
        name=f"quadratic(d={d},kappa={lip_grad / mu:g})",
    )
    _check_smooth(problem, gen)
    return problem


def _check_smooth(problem: ProblemInstance, gen: np.random.Generator, points: int = 8) -> None:
    for _ in range(points):
        x = problem.require_ground_truth().minimizer + gen.standard_normal(problem.dim)
        lower, gap, upper = two_sided_bounds(problem, x)
        slack = 1e-9 * (1.0 + abs(gap))
        if not lower - slack <= gap <= upper + slack:
            raise InvariantError(f"{problem.name}: two-sided bound fails ({lower}, {gap}, {upper})")


# --- Nonsmooth parts ---

def ball_constraint(radius: float) -> Tuple[ValueFn, ProxFn]:
    if radius <= 0:
        raise ValueError(f"ball radius must be positive, got {radius}")

    def value(x):
        return 0.0 if np.linalg.norm(x) <= radius * (1 + 1e-12) else float("inf")

    def prox(x, step):
        norm = np.linalg.norm(x)
        return x if norm <= radius else x * (radius / norm)

    return value, prox


def box_constraint(lo: float, hi: float) -> Tuple[ValueFn, ProxFn]:
    if not lo < hi:
        raise ValueError(f"empty box [{lo}, {hi}]")

    def value(x):
        x = np.atleast_1d(x)
        tol = 1e-12 * (1.0 + float(np.max(np.abs(x))))
        return 0.0 if np.all(x >= lo - tol) and np.all(x <= hi + tol) else float("inf")

    def prox(x, step):
        return np.clip(x, lo, hi)

    return value, prox


def l1_penalty(weight: float) -> Tuple[ValueFn, ProxFn]:
    if weight <= 0:
        raise ValueError(f"l1 weight must be positive, got {weight}")

    def value(x):
        return weight * float(np.sum(np.abs(x)))

    def prox(x, step):
        return np.sign(x) * np.maximum(np.abs(x) - weight * step, 0.0)

    return value, prox


def composite_problem(
    smooth: ProblemInstance,
    nonsmooth_value: ValueFn,
    prox: ProxFn,
    combined_mu: Optional[float] = None,
    name: str = "composite",
) -> CompositeProblem:
    """Attach h to ``smooth`` and solve for (x*, f*, grad g(x*)) by proximal gradient."""
    mu = smooth.mu if combined_mu is None else combined_mu
    x = deterministic_solve(
        smooth.value, smooth.grad, np.zeros(smooth.dim), mu, lip=smooth.lip_grad, prox=prox,
        tol=GROUND_TRUTH_TOL, max_iter=INNER_MAX_ITER,
    )
    truth = CompositeGroundTruth(
        minimizer=x, min_value=smooth.value(x) + nonsmooth_value(x), grad_at_min=smooth.grad(x)
    )
    residual = float(np.linalg.norm(gradient_mapping(smooth.grad, prox, x, 1.0 / smooth.lip_grad)))
    logging.debug(f"{name}: ground truth KKT residual {residual:.3e}")
    return CompositeProblem(
        smooth=smooth, nonsmooth_value=nonsmooth_value, prox=prox, combined_mu=mu, ground_truth=truth, name=name
    )


def make_composite(
    d: int,
    kind: Union[str, ConstraintKind],
    mu: float,
    lip_grad: float,
    sigma: float,
    tail: Union[str, Tail] = Tail.GAUSSIAN,
    seed: int = 0,
    radius: float = 1.0,
    lo: float = -1.0,
    hi: float = 1.0,
    weight: float = 1.0,
    dof: float = DEFAULT_DOF,
) -> CompositeProblem:
    """Quadratic g whose unconstrained minimizer sits outside the region where h is inactive.

    ``ball``: indicator of the radius ball, minimizer of g at distance 2 radius.
    ``box``: indicator of [lo, hi]^d, minimizer of g displaced by twice the box half-width.
    ``l1``: weight ||x||_1, minimizer of g at 2 weight / mu along a random sign pattern.
    """
    kind = ConstraintKind(kind)
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if not 0 < mu <= lip_grad:
        raise ValueError(f"need lip_grad >= mu > 0, got mu={mu}, L={lip_grad}")
    gen = derive_rng(seed, [GENERATOR_STREAM]).gen
    A = _rotated_hessian(gen, d, mu, lip_grad)
    direction = gen.standard_normal(d)
    direction /= np.linalg.norm(direction)
    if kind == ConstraintKind.BALL:
        h, prox = ball_constraint(radius)
        center = COMPOSITE_DISPLACEMENT * radius * direction
    elif kind == ConstraintKind.BOX:
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("generated boxes must be bounded")
        h, prox = box_constraint(lo, hi)
        center = 0.5 * (lo + hi) + COMPOSITE_DISPLACEMENT * 0.5 * (hi - lo) * np.sign(direction)
    else:
        h, prox = l1_penalty(weight)
        center = COMPOSITE_DISPLACEMENT * weight / mu * np.sign(direction)
    smooth = quadratic_instance(
        A, center, sigma, tail, dof, mu=mu, lip_grad=lip_grad, name=f"quadratic(d={d},kappa={lip_grad / mu:g})"
    )
    problem = composite_problem(smooth, h, prox, name=f"composite({kind.value},d={d})")
    _check_composite(problem, gen)
    return problem


def _check_composite(problem: CompositeProblem, gen: np.random.Generator, points: int = 8) -> None:
    truth = problem.require_ground_truth()
    for _ in range(points):
        x = problem.prox(truth.minimizer + gen.standard_normal(problem.dim), 1.0)
        lower, gap, upper = composite_two_sided_bounds(problem, x)
        slack = 1e-8 * (1.0 + abs(gap))
        if not lower - slack <= gap <= upper + slack:
            raise InvariantError(f"{problem.name}: two-sided bound fails ({lower}, {gap}, {upper})")


# --- Finite populations ---

class Population(NamedTuple):
    features: np.ndarray  # (n_pop, d)
    targets: np.ndarray   # (n_pop,)


def _draw_population(d: int, n_pop: int, gen: np.random.Generator, noise: float, heavy: bool = False) -> Population:
    spectrum = np.geomspace(1.0, 0.1, d)
    A = (gen.standard_normal((n_pop, d)) * np.sqrt(spectrum)) @ _rotation(gen, d).T
    w = gen.standard_normal(d)
    eps = gen.standard_t(DEFAULT_DOF, size=n_pop) if heavy else gen.standard_normal(n_pop)
    return Population(A, A @ w + noise * eps)


def _scaled_population(
    d: int, n_pop: int, mu: float, lip_hat: float, seed: int, noise: float, kappa: Optional[float] = None
) -> Population:
    """Least-squares population with max ||a_z||^2 + mu = lip_hat.

    With ``kappa`` set the population L / mu is pinned to it as well.
    """
    if noise <= 0:
        raise ContractError("a consistent population has f* = 0; need noise > 0")
    if n_pop < d:
        raise ContractError(f"degenerate population: {n_pop} samples in dimension {d}")
    if lip_hat <= mu:
        raise ValueError(f"need lip_hat > mu, got {lip_hat} <= {mu}")
    gen = derive_rng(seed, [GENERATOR_STREAM]).gen
    if kappa is not None:
        return _conditioned_population(d, n_pop, mu, lip_hat, kappa, gen, noise)
    A, b = _draw_population(d, n_pop, gen, noise)
    scale = math.sqrt((lip_hat - mu) / float(np.max(np.sum(A * A, axis=1))))
    return Population(A * scale, b * scale)


def _conditioned_population(
    d: int, n_pop: int, mu: float, lip_hat: float, kappa: float, gen: np.random.Generator, noise: float
) -> Population:
    """Rows on the sphere of radius sqrt(lip_hat - mu) with top mean-Hessian eigenvalue kappa mu.

    The feature spectrum decays geometrically with ratio r; log r is found by
    root bracketing between an isotropic and an almost rank-one population.
    """
    G = gen.standard_normal((n_pop, d))
    Q = _rotation(gen, d)
    w = gen.standard_normal(d)
    eps = gen.standard_normal(n_pop)
    radius = math.sqrt(lip_hat - mu)
    target = (kappa - 1.0) * mu

    def rows(log_ratio):
        V = (G * np.sqrt(np.geomspace(1.0, math.exp(log_ratio), d))) @ Q.T
        return V * (radius / np.linalg.norm(V, axis=1))[:, None]

    def excess(log_ratio):
        A = rows(log_ratio)
        return float(linalg.eigvalsh(A.T @ A / n_pop)[-1]) - target

    lo, hi = math.log(CONDITIONING_MIN_RATIO), 0.0
    at_lo, at_hi = excess(lo), excess(hi)
    if at_hi == 0.0:
        log_ratio = hi
    elif at_lo == 0.0:
        log_ratio = lo
    elif at_lo > 0.0 > at_hi:
        log_ratio = optimize.brentq(excess, lo, hi, xtol=1e-14)
    else:
        reach = (1.0 + (at_hi + target) / mu, 1.0 + (at_lo + target) / mu)
        raise ContractError(
            f"population kappa={kappa:g} out of reach for d={d}, n={n_pop}, "
            f"lip_hat={lip_hat:g}: attainable range [{reach[0]:.4g}, {reach[1]:.4g}]"
        )
    A = rows(log_ratio)
    return Population(A, A @ w + noise * eps)


def _multinomial_sampler(n_pop: int):
    """Batches of n draws with replacement, stored as empirical weights over the population."""
    probs = np.full(n_pop, 1.0 / n_pop)

    def sampler(gen, n):
        return gen.multinomial(n, probs) / n

    return sampler


def _least_squares(pop: Population, mu: float):
    """Weighted-mean maps of 0.5 (<a, x> - b)^2 + (mu/2)||x||^2."""
    A, b = pop
    d = A.shape[1]

    def loss(x, weights):
        r = A @ x - b
        return 0.5 * float(weights @ (r * r)) + 0.5 * mu * float(x @ x)

    def loss_grad(x, weights):
        return A.T @ (weights * (A @ x - b)) + mu * x

    def normal_equations(weights):
        return (A.T * weights) @ A + mu * np.eye(d), A.T @ (weights * b)

    return loss, loss_grad, normal_equations


def _least_squares_population(pop: Population, mu: float, name: str, sigma2: Optional[float] = None) -> ProblemInstance:
    """Population objective as a quadratic ProblemInstance; stochastic gradients use one sample, batches a multinomial reweighting."""
    A, b = pop
    n_pop, d = A.shape
    loss, loss_grad, normal = _least_squares(pop, mu)
    uniform = np.full(n_pop, 1.0 / n_pop)
    H, r = normal(uniform)
    x_star = linalg.solve(H, r, assume_a="pos")
    if sigma2 is None:
        # per-sample gradient variance evaluated at the minimizer
        grads = A * (A @ x_star - b)[:, None] + mu * x_star
        sigma2 = float(np.mean(np.sum(grads * grads, axis=1)))

    def stoch_grad(x, gen):
        z = int(gen.integers(n_pop))
        return A[z] * (A[z] @ x - b[z]) + mu * x

    def stoch_grad_batch(x, gen, s):
        return loss_grad(x, gen.multinomial(s, uniform) / s)

    return ProblemInstance(
        dim=d,
        value=lambda x: loss(x, uniform),
        grad=lambda x: loss_grad(x, uniform),
        stoch_grad=stoch_grad,
        mu=mu,
        lip_grad=float(linalg.eigvalsh(H)[-1]),
        sigma2=sigma2,
        ground_truth=GroundTruth(minimizer=x_star, min_value=loss(x_star, uniform)),
        hessian=H,
        name=name,
        stoch_grad_batch=stoch_grad_batch,
    )


def make_nonneg_erm(
    d: int,
    n_pop: int,
    mu: float,
    lip_hat: float,
    seed: int = 0,
    noise: float = 0.5,
    kappa: Optional[float] = None,
) -> ErmProblem:
    """Regularized least squares over a finite inconsistent population (f* > 0).

    Rows are rescaled so that max ||a_z||^2 + mu equals ``lip_hat``; the
    population constant L is the top eigenvalue of the mean Hessian, equal to
    ``kappa * mu`` when ``kappa`` is given.
    """
    pop = _scaled_population(d, n_pop, mu, lip_hat, seed, noise, kappa)
    loss, loss_grad, normal = _least_squares(pop, mu)
    population = _least_squares_population(pop, mu, f"nonneg_erm(d={d},n={n_pop})")
    _check_smooth(population, derive_rng(seed, [GENERATOR_STREAM, 1]).gen)
    kappa_hat = lip_hat / mu
    logging.debug(f"{population.name}: kappa={population.lip_grad / mu:.3g}, kappa_hat={kappa_hat:.3g}")
    return ErmProblem(
        population=population,
        sampler=_multinomial_sampler(n_pop),
        sample_loss=loss,
        sample_loss_grad=loss_grad,
        lip_grad_hat=float(lip_hat),
        n_min=math.ceil(ERM_NMIN_FACTOR * d * kappa_hat),
        normal_equations=normal,
        name=population.name,
    )


def make_composite_erm(
    d: int,
    n_pop: int,
    mu: float,
    lip_hat: float,
    radius: float = 1.0,
    seed: int = 0,
    noise: float = 0.5,
    kappa: Optional[float] = None,
) -> ErmProblem:
    """Ball-constrained regularized least squares exposing the Lipschitz moment.

    Targets are rescaled so the unconstrained population minimizer sits at
    distance 2 radius.  The moment is sqrt(mean_z l(z)^2) with l(z) the
    supremum of ||grad f(x, z)|| over the ball.
    ``kappa`` pins the population L / mu as in ``make_nonneg_erm``.
    """
    A, b = _scaled_population(d, n_pop, mu, lip_hat, seed, noise, kappa)
    free = _least_squares_population(Population(A, b), mu, "unconstrained")
    b = b * (COMPOSITE_DISPLACEMENT * radius / float(np.linalg.norm(free.require_ground_truth().minimizer)))
    pop = Population(A, b)
    row_norms = np.linalg.norm(A, axis=1)
    lipschitz = row_norms * (row_norms * radius + np.abs(b)) + mu * radius
    moment = float(math.sqrt(np.mean(lipschitz ** 2)))
    loss, loss_grad, normal = _least_squares(pop, mu)
    population = _least_squares_population(pop, mu, f"composite_erm(d={d},n={n_pop})", sigma2=4.0 * moment ** 2)
    h, prox = ball_constraint(radius)
    return ErmProblem(
        population=population,
        sampler=_multinomial_sampler(n_pop),
        sample_loss=loss,
        sample_loss_grad=loss_grad,
        lip_grad_hat=float(lip_hat),
        n_min=math.ceil(ERM_NMIN_FACTOR * d * lip_hat / mu),
        normal_equations=normal,
        composite=composite_problem(population, h, prox, name=population.name),
        lip_moment=moment,
        name=population.name,
    )


def make_smoothed_regression(
    d: int, n_pop: int, nu: float, mu: float, seed: int = 0, noise: float = 0.5
) -> ErmProblem:
    """Huber-smoothed absolute-deviation regression M_nu(<a, x> - b) + (mu/2)||x||^2.

    Residual noise is Student-t, so the unsmoothed absolute loss is the
    natural robust choice and the smoothing makes every sample loss 1/nu-smooth.
    """
    if n_pop < d:
        raise ContractError(f"degenerate population: {n_pop} samples in dimension {d}")
    huber = smoothed_loss(ScalarLoss.ABS, nu)
    A, b = _draw_population(d, n_pop, derive_rng(seed, [GENERATOR_STREAM]).gen, noise, heavy=True)

    def loss(x, weights):
        return float(weights @ huber.value(A @ x - b)) + 0.5 * mu * float(x @ x)

    def loss_grad(x, weights):
        return A.T @ (weights * huber.derivative(A @ x - b)) + mu * x

    def stoch_grad(x, gen):
        z = int(gen.integers(n_pop))
        return A[z] * huber.derivative(A[z] @ x - b[z]) + mu * x

    uniform = np.full(n_pop, 1.0 / n_pop)

    def stoch_grad_batch(x, gen, s):
        return loss_grad(x, gen.multinomial(s, uniform) / s)

    lip = float(linalg.eigvalsh(A.T @ A / n_pop)[-1]) * huber.lip_grad + mu
    lip_hat = float(np.max(np.sum(A * A, axis=1))) * huber.lip_grad + mu
    x_star = deterministic_solve(
        lambda x: loss(x, uniform), lambda x: loss_grad(x, uniform), np.zeros(d), mu, lip=lip, tol=GROUND_TRUTH_TOL,
    )
    grads = A * huber.derivative(A @ x_star - b)[:, None] + mu * x_star
    population = ProblemInstance(
        dim=d,
        value=lambda x: loss(x, uniform),
        grad=lambda x: loss_grad(x, uniform),
        stoch_grad=stoch_grad,
        mu=mu,
        lip_grad=lip,
        sigma2=float(np.mean(np.sum(grads * grads, axis=1))),
        ground_truth=GroundTruth(minimizer=x_star, min_value=loss(x_star, uniform)),
        name=f"smoothed_regression(d={d},n={n_pop},nu={nu:g})",
        stoch_grad_batch=stoch_grad_batch,
    )
    return ErmProblem(
        population=population,
        sampler=_multinomial_sampler(n_pop),
        sample_loss=loss,
        sample_loss_grad=loss_grad,
        lip_grad_hat=lip_hat,
        n_min=math.ceil(ERM_NMIN_FACTOR * d * lip_hat / mu),
        name=population.name,
    )


def true_gap(problem: Union[ProblemInstance, CompositeProblem, ErmProblem], x: Vector) -> float:
    """f(x) - f*, +inf outside dom h, clipped at zero within round-off."""
    if isinstance(problem, ErmProblem):
        problem = problem.composite if problem.composite is not None else problem.population
    truth = problem.require_ground_truth()
    value = problem.value(np.asarray(x, dtype=float))
    if not np.isfinite(value):
        return float("inf")
    gap = value - truth.min_value
    if gap < -1e-9 * (1.0 + abs(truth.min_value)):
        raise InvariantError(f"{problem.name}: point beats the recorded minimum by {-gap:.3e}")
    return max(gap, 0.0)
