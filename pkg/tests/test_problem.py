import math

import numpy as np
import pytest

from src.core.errors import ContractError, InvariantError
from src.core.problem import (
    ProblemInstance,
    bregman_gap,
    composite_two_sided_bounds,
    condition_number,
    two_sided_bounds,
    with_proximal_term,
)
from src.core.problems import box_constraint, composite_problem, l1_penalty, make_composite, quadratic_instance
from src.core.rng import derive_rng


@pytest.mark.parametrize("mu, lip, kappa", [(1.0, 1.0, 1.0), (0.5, 50.0, 100.0)])
def test_condition_number(mu, lip, kappa):
    problem = quadratic_instance(np.diag([mu, lip]), [0.0, 0.0])
    assert condition_number(problem) == pytest.approx(kappa)


def test_lipschitz_below_strong_convexity_rejected():
    with pytest.raises(InvariantError):
        quadratic_instance([[1.0]], [0.0], mu=2.0, lip_grad=1.0)


def test_negative_variance_rejected():
    with pytest.raises(InvariantError):
        ProblemInstance(1, abs, abs, lambda x, g: x, mu=1.0, lip_grad=1.0, sigma2=-1.0)


def test_missing_ground_truth_fails_fast():
    problem = ProblemInstance(1, abs, abs, lambda x, g: x, mu=1.0, lip_grad=1.0, sigma2=0.0)
    with pytest.raises(ContractError):
        two_sided_bounds(problem, np.zeros(1))


def test_stochastic_gradient_unbiased_within_variance():
    problem = quadratic_instance(np.diag([1.0, 3.0, 9.0]), [1.0, 0.0, -1.0], sigma=2.0)
    gen = derive_rng(5, [0]).gen
    x = np.array([0.3, -0.2, 0.4])
    draws = np.array([problem.stoch_grad(x, gen) for _ in range(20_000)])
    se = draws.std(axis=0) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - problem.grad(x)) <= 5 * se)
    noise_var = float(np.mean(np.sum((draws - problem.grad(x)) ** 2, axis=1)))
    assert noise_var <= problem.sigma2 * 1.05


def test_mean_stochastic_gradient_falls_back_to_single_draws():
    calls = []

    def stoch_grad(x, gen):
        calls.append(1)
        return x + gen.standard_normal(1)

    problem = ProblemInstance(1, abs, lambda x: x, stoch_grad, mu=1.0, lip_grad=1.0, sigma2=1.0)
    g = problem.mean_stoch_grad(np.array([2.0]), derive_rng(0).gen, 400)
    assert len(calls) == 400
    assert g == pytest.approx([2.0], abs=0.25)
    with pytest.raises(ValueError):
        problem.mean_stoch_grad(np.zeros(1), derive_rng(0).gen, 0)


def test_proximal_term_shifts_batched_gradients(half_square):
    phi = with_proximal_term(half_square, 2.0, np.array([1.0]))
    assert phi.stoch_grad_batch is not None
    y = np.array([3.0])
    assert phi.mean_stoch_grad(y, derive_rng(0).gen, 10 ** 9) == pytest.approx(phi.grad(y))
    assert phi.grad(y) == pytest.approx([7.0])


def test_proximal_term_closed_form(half_square):
    phi = with_proximal_term(half_square, 1.0, np.array([2.0]))
    truth = phi.require_ground_truth()
    assert truth.minimizer == pytest.approx([1.0])
    assert truth.min_value == pytest.approx(1.0)
    assert phi.mu == 2.0 and phi.lip_grad == 2.0
    assert phi.grad(np.array([1.0])) == pytest.approx([0.0])


def test_proximal_term_zero_amplitude_is_identity(half_square):
    assert with_proximal_term(half_square, 0.0, np.array([3.0])) is half_square


def test_two_sided_bounds_hold(diag_quadratic):
    gen = derive_rng(0, [9]).gen
    for _ in range(100):
        x = diag_quadratic.require_ground_truth().minimizer + gen.normal(size=5)
        lower, gap, upper = two_sided_bounds(diag_quadratic, x)
        assert lower <= gap * (1 + 1e-9) + 1e-12
        assert gap <= upper * (1 + 1e-9) + 1e-12


def test_constrained_one_dimensional_truth():
    h, prox = box_constraint(0.0, math.inf)
    problem = composite_problem(quadratic_instance([[1.0]], [-1.0]), h, prox)
    truth = problem.require_ground_truth()
    assert truth.minimizer == pytest.approx([0.0], abs=1e-12)
    assert truth.min_value == pytest.approx(0.5)
    assert truth.grad_at_min == pytest.approx([1.0])
    assert problem.value(np.array([-0.1])) == math.inf


def test_soft_threshold_truth():
    h, prox = l1_penalty(1.0)
    problem = composite_problem(quadratic_instance([[1.0]], [2.0]), h, prox)
    truth = problem.require_ground_truth()
    assert truth.minimizer == pytest.approx([1.0], abs=1e-10)
    assert truth.min_value == pytest.approx(1.5)


@pytest.mark.parametrize("kind", ["ball", "box", "l1"])
def test_composite_bounds_and_bregman_nonnegative(kind):
    problem = make_composite(3, kind, 1.0, 8.0, 0.0, seed=4)
    gen = derive_rng(4, [1]).gen
    truth = problem.require_ground_truth()
    for _ in range(50):
        x = problem.prox(truth.minimizer + gen.normal(size=3), 1.0)
        assert bregman_gap(problem, x) >= -1e-9
        lower, gap, upper = composite_two_sided_bounds(problem, x)
        slack = 1e-8 * (1 + abs(gap))
        assert lower - slack <= gap <= upper + slack
