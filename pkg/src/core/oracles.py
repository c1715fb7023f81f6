"""Minimization oracles with the 2/3-confidence contract, plus the inner solver.

Each streaming oracle solves the proximal subproblem
``phi(y) = f(y) + (lam/2)||y - center||^2`` (plus ``h`` for the proximal
variant) starting from ``center``.  Given ``delta_init >= phi(center) - min phi``
it targets an expected gap of ``delta / 3``, so by Markov's inequality the
returned point has gap at most ``delta`` with probability at least 2/3.

Restart structure: ``K = ceil(log2(3 delta_init / delta))`` epochs, epoch k
halving the expected residual from ``delta_init / 2^(k-1)`` to ``delta_init / 2^k``.
"""

import logging
import math
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from src.config import (
    ACC_BATCH,
    ACC_BIAS_LOG,
    INNER_MAX_ITER,
    INNER_TOL,
    MARKOV_FACTOR,
    SGD_BIAS_ITERS,
    SGD_NOISE_ITERS,
    SGD_NOISE_STEP,
)
from src.core.errors import ConvergenceError
from src.core.problem import CompositeProblem, ProblemInstance, ProxFn, Vector, with_proximal_term
from src.core.rng import RngStream


class OracleResult(NamedTuple):
    point: Vector
    samples: int


def epoch_count(delta: float, delta_init: float) -> int:
    if delta <= 0:
        raise ValueError(f"oracle accuracy must be positive, got {delta}")
    if delta_init <= 0:
        raise ValueError(f"initial gap bound must be positive, got {delta_init}")
    return max(1, math.ceil(math.log2(MARKOV_FACTOR * delta_init / delta)))


def sgd_epoch_plan(mu: float, lip: float, sigma2: float, delta_k: float):
    """(stepsize, iterations) for one halving epoch of constant-step SGD."""
    kappa = lip / mu
    eta = 1.0 / (2.0 * lip)
    iters = math.ceil(SGD_BIAS_ITERS * kappa)
    if sigma2 > 0:
        eta = min(eta, delta_k / (SGD_NOISE_STEP * sigma2))
        iters = max(iters, math.ceil(SGD_NOISE_ITERS * sigma2 / (mu * delta_k)))
    return eta, max(iters, 2)


def acc_epoch_plan(mu: float, lip: float, sigma2: float, delta_k: float):
    """(iterations, minibatch) for one halving epoch of accelerated SGD."""
    iters = max(1, math.ceil(math.sqrt(lip / mu) * ACC_BIAS_LOG))
    batch = 1
    if sigma2 > 0:
        batch = max(1, math.ceil(ACC_BATCH * sigma2 / (math.sqrt(mu * lip) * delta_k)))
    return iters, batch


def _restarted_sgd(
    smooth: ProblemInstance,
    prox: Optional[ProxFn],
    mu: float,
    delta: float,
    delta_init: float,
    center: Vector,
    rng: RngStream,
    history: Optional[List[Vector]],
) -> OracleResult:
    x = np.array(center, dtype=float, copy=True)
    lip, sigma2 = smooth.lip_grad, smooth.sigma2
    samples = 0
    for k in range(1, epoch_count(delta, delta_init) + 1):
        eta, iters = sgd_epoch_plan(mu, lip, sigma2, delta_init / 2 ** k)
        gen = rng.child(k).gen
        tail_start = iters // 2
        tail_sum = np.zeros_like(x)
        for t in range(iters):
            x = x - eta * smooth.stoch_grad(x, gen)
            if prox is not None:
                x = prox(x, eta)
            if t >= tail_start:
                tail_sum += x
        x = tail_sum / (iters - tail_start)
        samples += iters
        if history is not None:
            history.append(x.copy())
    return OracleResult(x, samples)


def _restarted_accelerated(
    smooth: ProblemInstance,
    prox: Optional[ProxFn],
    mu: float,
    delta: float,
    delta_init: float,
    center: Vector,
    rng: RngStream,
    history: Optional[List[Vector]],
) -> OracleResult:
    x = np.array(center, dtype=float, copy=True)
    lip, sigma2 = smooth.lip_grad, smooth.sigma2
    root = math.sqrt(lip / mu)
    momentum = (root - 1.0) / (root + 1.0)
    samples = 0
    for k in range(1, epoch_count(delta, delta_init) + 1):
        iters, batch = acc_epoch_plan(mu, lip, sigma2, delta_init / 2 ** k)
        gen = rng.child(k).gen
        x_prev = x
        for _ in range(iters):
            y = x + momentum * (x - x_prev)
            x_new = y - smooth.mean_stoch_grad(y, gen, batch) / lip
            if prox is not None:
                x_new = prox(x_new, 1.0 / lip)
            x_prev, x = x, x_new
        samples += iters * batch
        if history is not None:
            history.append(x.copy())
    return OracleResult(x, samples)


def sgd_oracle(
    problem: ProblemInstance,
    delta: float,
    lam: float,
    delta_init: float,
    center: Vector,
    rng: RngStream,
    history: Optional[List[Vector]] = None,
) -> OracleResult:
    """Restarted constant-step SGD with tail averaging on the proximal subproblem."""
    phi = with_proximal_term(problem, lam, center)
    return _restarted_sgd(phi, None, phi.mu, delta, delta_init, center, rng, history)


def acc_sgd_oracle(
    problem: ProblemInstance,
    delta: float,
    lam: float,
    delta_init: float,
    center: Vector,
    rng: RngStream,
    history: Optional[List[Vector]] = None,
) -> OracleResult:
    """Restarted Nesterov-accelerated minibatch SGD; epochs last ~sqrt(kappa) steps."""
    phi = with_proximal_term(problem, lam, center)
    return _restarted_accelerated(phi, None, phi.mu, delta, delta_init, center, rng, history)


def prox_sgd_oracle(
    composite: CompositeProblem,
    delta: float,
    lam: float,
    delta_init: float,
    center: Vector,
    rng: RngStream,
    history: Optional[List[Vector]] = None,
) -> OracleResult:
    """Proximal variant of ``sgd_oracle``: every step is followed by prox_h."""
    phi = with_proximal_term(composite.smooth, lam, center)
    mu = composite.combined_mu + lam
    return _restarted_sgd(phi, composite.prox, mu, delta, delta_init, center, rng, history)


def prox_acc_sgd_oracle(
    composite: CompositeProblem,
    delta: float,
    lam: float,
    delta_init: float,
    center: Vector,
    rng: RngStream,
    history: Optional[List[Vector]] = None,
) -> OracleResult:
    """Proximal variant of ``acc_sgd_oracle``."""
    phi = with_proximal_term(composite.smooth, lam, center)
    mu = composite.combined_mu + lam
    return _restarted_accelerated(phi, composite.prox, mu, delta, delta_init, center, rng, history)


def gradient_mapping(
    grad: Callable[[Vector], Vector], prox: Optional[ProxFn], x: Vector, step: float
) -> Vector:
    g = grad(x)
    if prox is None:
        return g
    return (x - prox(x - step * g, step)) / step


def deterministic_solve(
    value: Callable[[Vector], float],
    grad: Callable[[Vector], Vector],
    x0: Vector,
    mu: float,
    lip: Optional[float] = None,
    prox: Optional[ProxFn] = None,
    tol: float = INNER_TOL,
    max_iter: int = INNER_MAX_ITER,
) -> Vector:
    """Accelerated (proximal) gradient descent with backtracking.

    Stops once the gradient-mapping norm is at most ``tol * mu * (1 + ||x||)``.
    Raises ConvergenceError after ``max_iter`` iterations.
    """
    if mu <= 0:
        raise ValueError(f"strong convexity must be positive, got {mu}")
    L = float(lip) if lip else max(mu, 1.0)
    x = np.array(x0, dtype=float, copy=True)
    if prox is not None:
        x = prox(x, 1.0 / L)
    x_prev = x
    for it in range(max_iter):
        if np.linalg.norm(gradient_mapping(grad, prox, x, 1.0 / L)) <= tol * mu * (1.0 + np.linalg.norm(x)):
            logging.debug(f"inner solve converged after {it} iterations")
            return x
        root = math.sqrt(L / mu)
        y = x + ((root - 1.0) / (root + 1.0)) * (x - x_prev)
        fy, gy = value(y), grad(y)
        while True:
            x_new = y - gy / L
            if prox is not None:
                x_new = prox(x_new, 1.0 / L)
            step = x_new - y
            if value(x_new) <= fy + float(gy @ step) + 0.5 * L * float(step @ step) + 1e-14 * abs(fy):
                break
            L *= 2.0
        # gradient-based restart keeps the momentum from overshooting
        if float((y - x_new) @ (x_new - x)) > 0:
            x_prev = x_new
        else:
            x_prev = x
        x = x_new
    raise ConvergenceError(f"inner solver did not reach tolerance {tol} in {max_iter} iterations")
