"""Deterministic property suites run by ``proxboost verify``.

Each suite draws randomized instances from a fixed seed and counts violations
of one family of inequalities; a clean run has zero violations everywhere.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core.composite import robust_gap_select
from src.core.engine import (
    delta_sequence,
    geometric_factor,
    geometric_schedule,
    init_bound_cap,
    prox_boost,
    quadratic_prox_minimizer,
    StageResult,
    total_oracle_calls,
    trials_for,
    verify_error_decomposition,
)
from src.core.problem import CompositeProblem, bregman_gap
from src.core.problems import (
    ball_constraint,
    box_constraint,
    composite_problem,
    l1_penalty,
    make_quadratic,
    quadratic_instance,
)
from src.core.robust import extract, euclidean, linearized_bregman, robust_select, scaled_euclidean
from src.core.rng import derive_rng
from src.core.smoothing import ScalarLoss, moreau_envelope_scalar

TOL = 1e-9


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    violations: int
    seconds: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.violations == 0


# --- Robust selection soundness ---

def _planted_cluster(gen, m: int, d: int, eps: float, metric: str):
    """Points with a strict majority within eps of ``center`` under the named pseudometric."""
    center = gen.normal(size=d)
    if metric == "euclidean":
        rho, reach = euclidean(), eps
    elif metric == "scaled_euclidean":
        scale = float(gen.uniform(0.2, 5.0))
        rho, reach = scaled_euclidean(scale), eps / scale
    else:
        weight = float(gen.uniform(0.1, 2.0))
        h, _ = l1_penalty(weight)
        g = gen.normal(size=d)
        rho = linearized_bregman(h, g)
        reach = eps / (np.linalg.norm(g) + weight * math.sqrt(d))
    majority = m // 2 + 1
    points = []
    for _ in range(majority):
        v = gen.normal(size=d)
        points.append(center + reach * gen.uniform() * v / np.linalg.norm(v))
    for _ in range(m - majority):
        points.append(center + gen.normal(size=d) * gen.choice([0.1, 1.0, 10.0]) * (1 + 10 * reach))
    order = gen.permutation(m)
    return center, [points[i] for i in order], rho


def robust_selection_suite(instances: int = 10_000, seed: int = 0) -> SuiteResult:
    started = time.perf_counter()
    gen = derive_rng(seed, [1]).gen
    violations, cases = 0, 0
    for k in range(instances):
        m = int(gen.choice([3, 5, 7, 9]))
        d = int(gen.integers(1, 4))
        eps = float(10 ** gen.uniform(-3, 0))
        for metric in ("euclidean", "scaled_euclidean", "linearized_bregman"):
            center, points, rho = _planted_cluster(gen, m, d, eps, metric)
            limit = 3 * eps * (1 + TOL) + TOL
            _, chosen = robust_select(points, rho)
            bad = rho(chosen, center) > limit
            bad |= any(rho(points[i], center) > limit for i in extract(points, rho))
            violations += int(bad)
            cases += 1
    return SuiteResult("robust-selection", cases, violations, time.perf_counter() - started)


# --- Inexact proximal point inequalities ---

def perturbed_stage_estimator(problem, gen, scale: float):
    """Stage estimator returning the exact proximal minimizer plus a random perturbation."""
    minimizer = quadratic_prox_minimizer(problem)

    def stage(j, lam_prev, center, target, stream):
        x = minimizer(lam_prev, center) if lam_prev > 0 else problem.require_ground_truth().minimizer
        return StageResult(x + scale * gen.normal(size=problem.dim), 0)

    return stage


def error_decomposition_suite(instances: int = 1000, seed: int = 0) -> SuiteResult:
    started = time.perf_counter()
    gen = derive_rng(seed, [2]).gen
    violations, worst = 0, math.inf
    for k in range(instances):
        d = int(gen.integers(1, 11))
        mu = float(10 ** gen.uniform(-1, 0.5))
        kappa = float(10 ** gen.uniform(0, 3))
        problem = make_quadratic(d, mu, mu * kappa, 0.0, seed=int(gen.integers(2 ** 31)))
        T = int(gen.integers(0, 7))
        schedule = geometric_schedule(mu, mu * kappa, 1.0, 0.1, T=T)
        scale = float(10 ** gen.uniform(-3, 0))
        stage = perturbed_stage_estimator(problem, gen, scale)
        x_in = gen.normal(size=d)
        _, trace = prox_boost(stage, schedule, derive_rng(seed, [2, k]), x_in)
        report = verify_error_decomposition(trace, problem, tol=TOL)
        violations += sum(1 for c in report.checks if c.slack < -TOL * (1 + abs(c.rhs)))
        worst = min(worst, report.worst_slack)
    return SuiteResult(
        "error-decomposition", instances, violations, time.perf_counter() - started, f"worst slack {worst:.3e}"
    )


# --- Schedule arithmetic ---

def schedule_arithmetic_suite(max_power: int = 20, eps: float = 1.0, p: float = 0.01) -> SuiteResult:
    started = time.perf_counter()
    violations, cases = 0, 0
    for power in range(max_power + 1):
        kappa = 2.0 ** power
        for composite in (False, True):
            variant = "boost-algc" if composite else "boost-alg"
            s = geometric_schedule(1.0, kappa, eps, p, variant=variant)
            T = s.T
            bounds = delta_sequence(s.lambdas, s.delta, 1.0, kappa, 1.0, composite=composite)[1:]
            checks = [
                T == power,
                geometric_factor(s.lambdas, 1.0) <= 2 + 2 * T + TOL,
                (kappa + s.lambdas[T]) / (1.0 + s.lambdas[T]) <= 2.0 + TOL,
                max(bounds) <= init_bound_cap(kappa, eps, composite) * (1 + TOL),
                total_oracle_calls(kappa, p, composite) == s.m * (T + 2),
                s.m == trials_for(p, (4 + 2 * T) if composite else (2 + T)),
            ]
            violations += sum(1 for ok in checks if not ok)
            cases += len(checks)
    return SuiteResult("schedule-arithmetic", cases, violations, time.perf_counter() - started)


# --- Composite gap fixtures ---

def _fixture_problem(gen, d: int) -> CompositeProblem:
    mu = float(10 ** gen.uniform(-0.5, 0.5))
    kappa = float(10 ** gen.uniform(0, 1))
    if d == 1:
        smooth = quadratic_instance([[mu]], [-float(gen.uniform(0.5, 2.0))], mu=mu, lip_grad=mu * kappa)
        h, prox = box_constraint(0.0, math.inf)
    else:
        A = np.diag(np.geomspace(mu, mu * kappa, d))
        radius = float(gen.uniform(0.5, 2.0))
        v = gen.normal(size=d)
        smooth = quadratic_instance(A, 2 * radius * v / np.linalg.norm(v), mu=mu, lip_grad=mu * kappa)
        h, prox = ball_constraint(radius)
    return composite_problem(smooth, h, prox, name=f"fixture(d={d})")


def _good_candidate(problem: CompositeProblem, gen, eps: float) -> np.ndarray:
    truth = problem.require_ground_truth()
    y = problem.prox(truth.minimizer + gen.normal(size=problem.dim), 1.0)
    t = 1.0
    while problem.value(truth.minimizer + t * (y - truth.minimizer)) - truth.min_value > eps:
        t *= 0.5
    return truth.minimizer + t * gen.uniform() * (y - truth.minimizer)


def gap_fixture_suite(instances: int = 1000, seed: int = 0) -> SuiteResult:
    started = time.perf_counter()
    gen = derive_rng(seed, [7]).gen
    violations = 0
    for _ in range(instances):
        d = int(gen.integers(1, 3))
        problem = _fixture_problem(gen, d)
        truth = problem.require_ground_truth()
        mu, kappa = problem.combined_mu, problem.lip_grad / problem.combined_mu
        eps = float(10 ** gen.uniform(-4, -1))
        m = int(gen.choice([3, 5, 7, 9, 11]))
        majority = m // 2 + 1
        r = math.sqrt(2 * eps / mu)
        points = [_good_candidate(problem, gen, eps) for _ in range(majority)]
        points += [problem.prox(truth.minimizer + 10 * r * gen.normal(size=d), 1.0) for _ in range(m - majority)]
        points = [points[i] for i in gen.permutation(m)]
        x_hat = points[extract(points, euclidean())[0]]
        error = gen.normal(size=d)
        error *= 3 * kappa * math.sqrt(mu * eps) * gen.uniform() / np.linalg.norm(error)
        x = points[robust_gap_select(points, problem, problem.smooth.grad(x_hat) + error)]
        slack = TOL * (1 + abs(truth.min_value))
        bad = float(np.linalg.norm(x - truth.minimizer)) > 3 * r * (1 + TOL)
        bad |= bregman_gap(problem, x) > 65 * kappa * eps + slack
        bad |= problem.value(x) - truth.min_value > 74 * kappa * eps + slack
        violations += int(bad)
    return SuiteResult("robust-gap-fixtures", instances, violations, time.perf_counter() - started)


# --- Moreau envelopes ---

def branch_points(fn: ScalarLoss, nu: float) -> np.ndarray:
    """Points where the envelope switches between its quadratic and linear pieces."""
    return np.array([-nu, nu]) if fn == ScalarLoss.ABS else np.array([1.0 - nu, 1.0])


def moreau_suite(points: int = 10_000, step: float = 1e-4) -> SuiteResult:
    started = time.perf_counter()
    violations, cases = 0, 0
    grid = np.linspace(-5.0, 5.0, points)
    for fn in ScalarLoss:
        psi = np.abs(grid) if fn == ScalarLoss.ABS else np.maximum(0.0, 1.0 - grid)
        for nu in (0.01, 0.1, 1.0):
            value, deriv = moreau_envelope_scalar(fn, nu, grid)
            diff = psi - value
            violations += int(np.sum((diff < -1e-12) | (diff > nu + 1e-12)))
            up, _ = moreau_envelope_scalar(fn, nu, grid + step)
            down, _ = moreau_envelope_scalar(fn, nu, grid - step)
            fd = (up - down) / (2 * step)
            breaks = branch_points(fn, nu)
            smooth = np.min(np.abs(grid[:, None] - breaks[None, :]), axis=1) > 2 * step
            violations += int(np.sum(np.abs(fd - deriv)[smooth] > 1e-6))
            cases += 2 * points
    return SuiteResult("moreau-envelope", cases, violations, time.perf_counter() - started)


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "robust-selection": robust_selection_suite,
    "error-decomposition": error_decomposition_suite,
    "schedule-arithmetic": schedule_arithmetic_suite,
    "robust-gap-fixtures": gap_fixture_suite,
    "moreau-envelope": moreau_suite,
}

# reduced instance counts for quick runs
QUICK_SIZES = {
    "robust-selection": {"instances": 500},
    "error-decomposition": {"instances": 100},
    "robust-gap-fixtures": {"instances": 200},
}


def run_suites(names: Optional[Sequence[str]] = None, quick: bool = False) -> List[SuiteResult]:
    names = list(names) if names else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; expected from {sorted(SUITES)}")
    results = []
    for name in names:
        kwargs = QUICK_SIZES.get(name, {}) if quick else {}
        result = SUITES[name](**kwargs)
        logging.info(f"{name}: {result.violations} violations in {result.cases} cases ({result.seconds:.1f}s)")
        results.append(result)
    return results
