import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.composite import (
    ALGC_CLEANUP_GAP,
    boost_algc,
    boost_ermc,
    bregman_pseudometric,
    ermc_cleanup_accuracy,
    ermc_cleanup_samples,
    ermc_stage_samples,
    gap_gradient_accuracy,
    odd_trials,
    proximal_subproblem,
    robust_gap,
    robust_gap_gradient_draws,
    robust_gap_select,
)
from src.core.engine import delta_sequence, geometric_schedule
from src.core.errors import ContractError
from src.core.problem import bregman_gap
from src.core.problems import (
    ball_constraint,
    box_constraint,
    composite_problem,
    l1_penalty,
    make_composite,
    make_composite_erm,
    make_nonneg_erm,
    quadratic_instance,
    true_gap,
)
from src.core.rng import derive_rng


@pytest.fixture(scope="module")
def half_line():
    """g = 0.5 (x + 1)^2 on [0, inf): x* = 0, f* = 0.5, kappa = 1."""
    h, prox = box_constraint(0.0, math.inf)
    return composite_problem(quadratic_instance([[1.0]], [-1.0]), h, prox)


@pytest.fixture(scope="module")
def ball_problem():
    return make_composite(2, "ball", 1.0, 4.0, 0.0, seed=3)


def exact_prox_alg(problem):
    def alg(eps, lam, delta_init, center, rng):
        sub = proximal_subproblem(problem, lam, center, solve=True)
        return sub.require_ground_truth().minimizer, 1

    return alg


@pytest.mark.parametrize("m, odd", [(1, 1), (4, 5), (5, 5), (116, 117)])
def test_odd_trials(m, odd):
    assert odd_trials(m) == odd


def test_odd_trials_rejects_zero():
    with pytest.raises(ValueError):
        odd_trials(0)


def test_bregman_pseudometric_examples(half_line):
    rho = bregman_pseudometric(half_line, np.array([1.0]))
    assert rho(np.array([0.3]), np.array([0.0])) == pytest.approx(0.3)
    assert rho(np.array([0.3]), np.array([0.3])) == 0.0
    h, prox = l1_penalty(2.0)
    slope = composite_problem(quadratic_instance([[1.0]], [5.0]), h, prox)
    rho = bregman_pseudometric(slope, np.zeros(1))
    assert rho(np.array([1.0]), np.array([3.0])) == pytest.approx(4.0)


def test_gradient_draw_count():
    h, prox = ball_constraint(1.0)
    problem = composite_problem(quadratic_instance(np.diag([1.0, 10.0]), [3.0, 0.0], sigma=2.0), h, prox)
    assert gap_gradient_accuracy(problem, 0.01) == pytest.approx(1.0)
    assert robust_gap_gradient_draws(problem, 0.01, 5) == 5 * 12
    assert robust_gap_gradient_draws(problem, 0.01, 4) == 5 * 12


def test_proximal_subproblem_truth(ball_problem):
    center = np.array([0.2, -0.1])
    sub = proximal_subproblem(ball_problem, 2.0, center, solve=True)
    assert sub.combined_mu == ball_problem.combined_mu + 2.0
    x = sub.require_ground_truth().minimizer
    assert np.linalg.norm(x) <= 1.0 + 1e-12
    assert bregman_gap(sub, sub.prox(x + np.array([0.3, 0.3]), 1.0)) >= -1e-9
    assert proximal_subproblem(ball_problem, 0.0, center).ground_truth is ball_problem.ground_truth


def test_noiseless_robust_gap_returns_minimizer(half_line):
    truth = half_line.require_ground_truth()
    est = robust_gap(lambda eps, rng: (truth.minimizer, 2), 5, 0.01, half_line, derive_rng(0))
    assert est.point == pytest.approx(truth.minimizer)
    assert est.index == 0
    assert est.gradient_samples == 5
    assert est.samples == 5 * 2 + 5


def test_robust_gap_uses_distinct_streams(half_line):
    paths = []

    def oracle(eps, rng):
        paths.append(rng.path)
        return np.zeros(1), 1

    robust_gap(oracle, 4, 0.01, half_line, derive_rng(1, [7]))
    assert paths == [(7, k) for k in range(5)]


def test_planted_majority_fixture(half_line):
    eps = 0.01
    candidates = [np.array([v]) for v in (0.005, 5.0, 0.0, 0.009, 3.0)]
    index = robust_gap_select(candidates, half_line, half_line.smooth.grad(candidates[0]))
    x = candidates[index]
    assert index == 0
    assert abs(x[0]) <= 3 * math.sqrt(2 * eps)
    assert bregman_gap(half_line, x) <= 65 * eps
    assert true_gap(half_line, x) <= 74 * eps


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([1, 3, 5, 7, 9, 11]), st.integers(0, 2 ** 31))
def test_extraction_sets_intersect_for_odd_trials(m, seed):
    gen = derive_rng(seed, [0]).gen
    h, prox = l1_penalty(1.0)
    problem = composite_problem(quadratic_instance(np.eye(2), [2.0, -2.0]), h, prox)
    candidates = [gen.normal(size=2) * gen.choice([0.01, 1.0, 10.0]) for _ in range(m)]
    index = robust_gap_select(candidates, problem, gen.normal(size=2))
    assert 0 <= index < m


@pytest.mark.parametrize(
    "lip_moment, mu, lam_prev, delta, expected", [(2.0, 1.0, 1.0, 0.1, 1080), (1.0, 1.0, 0.0, 1.0, 54)]
)
def test_ermc_stage_samples(lip_moment, mu, lam_prev, delta, expected):
    assert ermc_stage_samples(lip_moment, mu, lam_prev, delta) == expected


def test_ermc_cleanup_constants():
    eps = ermc_cleanup_accuracy(0.1, 1.0, 4.0, 8.0)
    assert eps == pytest.approx(3.378e-4, rel=1e-3)
    assert ermc_cleanup_samples(2.0, 1.0, 8.0, eps) == math.ceil(24 / (9 * eps))


def test_boost_algc_exact_oracle(ball_problem):
    s = geometric_schedule(1.0, 4.0, 0.01, 0.1, variant="boost-algc", m=3)
    x_in = ball_problem.prox(np.zeros(2), 1.0)
    delta_in = true_gap(ball_problem, x_in)
    seen = []
    alg = exact_prox_alg(ball_problem)

    def recording(eps, lam, delta_init, center, rng):
        seen.append(eps)
        return alg(eps, lam, delta_init, center, rng)

    x, trace = boost_algc(recording, ball_problem, s, delta_in, x_in, derive_rng(5))
    assert true_gap(ball_problem, x) <= s.delta * s.bound_factor
    assert len(trace) == s.T + 2
    assert trace.total_samples == (s.T + 2) * (3 + 3)
    assert trace.init_bounds == pytest.approx(delta_sequence(s.lambdas, s.delta, 1.0, 4.0, delta_in, composite=True))
    lam_T = s.lambdas[-1]
    assert seen[0] == pytest.approx(s.delta / 9)
    assert seen[-1] == pytest.approx(s.delta * (1.0 + lam_T) / (ALGC_CLEANUP_GAP * (4.0 + lam_T)))


def test_boost_algc_even_trials_rounded_up(ball_problem):
    s = geometric_schedule(1.0, 4.0, 0.01, 0.1, variant="boost-algc", T=0, m=2)
    calls = []
    alg = exact_prox_alg(ball_problem)

    def counting(*args):
        calls.append(1)
        return alg(*args)

    boost_algc(counting, ball_problem, s, 1.0, np.zeros(2), derive_rng(0))
    assert len(calls) == 3 * (s.T + 2)


def test_boost_algc_rejects_nonpositive_initial_gap(ball_problem):
    s = geometric_schedule(1.0, 4.0, 0.01, 0.1, variant="boost-algc")
    with pytest.raises(ContractError):
        boost_algc(exact_prox_alg(ball_problem), ball_problem, s, 0.0, np.zeros(2), derive_rng(0))


@pytest.fixture(scope="module")
def composite_erm():
    return make_composite_erm(2, 100, 1.0, 10.0, radius=1.0, seed=2)


def test_composite_erm_geometry(composite_erm):
    truth = composite_erm.composite.require_ground_truth()
    assert np.linalg.norm(truth.minimizer) == pytest.approx(1.0, abs=1e-9)
    assert composite_erm.population.sigma2 == pytest.approx(4 * composite_erm.lip_moment ** 2)


def test_boost_ermc_run(composite_erm):
    T, m, delta = 1, 3, 1.0
    x, trace = boost_ermc(composite_erm, delta, T, m, derive_rng(4))
    assert len(trace) == T + 2
    assert np.linalg.norm(x) <= 1.0 + 1e-12
    lambdas = (1.0, 2.0)
    factor = 1.0 + sum(lam / (1.0 + prev) for lam, prev in zip(lambdas, (0.0, 1.0)))
    assert true_gap(composite_erm, x) <= factor * delta
    stage0 = ermc_stage_samples(composite_erm.lip_moment, 1.0, 0.0, delta)
    assert trace.samples[0] == m * stage0


def test_boost_ermc_needs_moment_and_composite(composite_erm):
    with pytest.raises(ContractError):
        boost_ermc(replace(composite_erm, lip_moment=None), 1.0, 1, 3, derive_rng(0))
    with pytest.raises(ContractError):
        boost_ermc(make_nonneg_erm(2, 50, 1.0, 10.0), 1.0, 1, 3, derive_rng(0))
