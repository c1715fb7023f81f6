from dataclasses import replace

import numpy as np
import pytest

from src.core.errors import ConvergenceError
from src.core.oracles import (
    acc_epoch_plan,
    acc_sgd_oracle,
    deterministic_solve,
    epoch_count,
    gradient_mapping,
    prox_sgd_oracle,
    sgd_epoch_plan,
    sgd_oracle,
)
from src.core.problem import CompositeProblem, with_proximal_term
from src.core.problems import make_composite, quadratic_instance, true_gap
from src.core.rng import derive_rng


def gap(problem, x):
    return problem.value(x) - problem.require_ground_truth().min_value


def test_epoch_count():
    assert epoch_count(0.1, 1.0) == 5
    assert epoch_count(10.0, 1.0) == 1
    with pytest.raises(ValueError):
        epoch_count(0.0, 1.0)
    with pytest.raises(ValueError):
        epoch_count(1.0, -1.0)


def test_noiseless_plans():
    eta, iters = sgd_epoch_plan(1.0, 400.0, 0.0, 1.0)
    assert eta == pytest.approx(1 / 800)
    assert iters == 6400
    acc_iters, batch = acc_epoch_plan(1.0, 400.0, 0.0, 1.0)
    assert batch == 1
    assert acc_iters / iters <= 0.15


def test_noise_term_scales_with_variance():
    def total(sigma2):
        return sum(sgd_epoch_plan(1.0, 2.0, sigma2, 2.0 ** -k)[1] for k in range(1, 13))

    assert 1.6 <= total(2.0) / total(1.0) <= 2.4


@pytest.mark.parametrize("oracle", [sgd_oracle, acc_sgd_oracle])
@pytest.mark.parametrize("lam", [0.0, 3.0])
def test_noiseless_oracle_meets_markov_target(diag_quadratic, oracle, lam):
    center = np.zeros(5)
    phi = with_proximal_term(diag_quadratic, lam, center)
    delta_init = gap(phi, center)
    delta = 1e-4 * delta_init
    history = []
    point, samples = oracle(diag_quadratic, delta, lam, delta_init, center, derive_rng(0), history)
    assert gap(phi, point) <= delta / 3
    assert samples > 0
    assert len(history) == epoch_count(delta, delta_init)
    gaps = [gap(phi, x) for x in history]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_oracle_is_deterministic_given_stream():
    problem = quadratic_instance(np.diag([1.0, 4.0]), [1.0, 1.0], sigma=1.0, tail="student_t")
    a = sgd_oracle(problem, 0.05, 1.0, 2.0, np.zeros(2), derive_rng(9, [1]))
    b = sgd_oracle(problem, 0.05, 1.0, 2.0, np.zeros(2), derive_rng(9, [1]))
    assert np.array_equal(a.point, b.point)
    assert a.samples == b.samples


def test_sgd_samples_match_epoch_plans():
    problem = quadratic_instance(np.diag([1.0, 2.0]), [0.0, 0.0], sigma=1.0)
    delta, delta_init = 0.1, 1.0
    result = sgd_oracle(problem, delta, 0.0, delta_init, np.ones(2), derive_rng(0))
    expected = sum(
        sgd_epoch_plan(1.0, 2.0, 1.0, delta_init / 2 ** k)[1] for k in range(1, epoch_count(delta, delta_init) + 1)
    )
    assert result.samples == expected


def test_prox_variant_with_zero_h_matches_sgd():
    problem = quadratic_instance(np.diag([1.0, 4.0]), [1.0, -2.0], sigma=0.5)
    composite = CompositeProblem(problem, lambda x: 0.0, lambda x, t: x, combined_mu=1.0)
    args = (0.05, 2.0, 3.0, np.zeros(2))
    a = sgd_oracle(problem, *args, derive_rng(4))
    b = prox_sgd_oracle(composite, *args, derive_rng(4))
    assert np.array_equal(a.point, b.point)
    assert a.samples == b.samples


def test_projected_sgd_converges_on_ball():
    problem = make_composite(3, "ball", 1.0, 4.0, 0.0, seed=1)
    center = problem.prox(np.zeros(3), 1.0)
    delta_init = true_gap(problem, center)
    delta = 1e-5 * delta_init
    point, _ = prox_sgd_oracle(problem, delta, 0.0, delta_init, center, derive_rng(0))
    assert np.linalg.norm(point) <= 1.0 + 1e-12
    assert true_gap(problem, point) <= delta


def test_deterministic_solve_matches_linear_solve(diag_quadratic):
    x = deterministic_solve(diag_quadratic.value, diag_quadratic.grad, np.zeros(5), 1.0, lip=16.0)
    assert x == pytest.approx(diag_quadratic.require_ground_truth().minimizer, abs=1e-8)


def test_deterministic_solve_optimal_start(diag_quadratic):
    x_star = diag_quadratic.require_ground_truth().minimizer
    x = deterministic_solve(diag_quadratic.value, diag_quadratic.grad, x_star, 1.0, lip=16.0, max_iter=1)
    assert np.array_equal(x, x_star)


def test_deterministic_solve_logistic_residual():
    gen = derive_rng(3).gen
    A = gen.normal(size=(50, 4))
    y = np.sign(gen.normal(size=50))
    mu = 0.1

    def value(x):
        return float(np.mean(np.logaddexp(0.0, -y * (A @ x)))) + 0.5 * mu * float(x @ x)

    def grad(x):
        s = -y / (1.0 + np.exp(y * (A @ x)))
        return A.T @ s / len(y) + mu * x

    x = deterministic_solve(value, grad, np.zeros(4), mu, tol=1e-10)
    assert np.linalg.norm(grad(x)) <= 1e-10 * mu * (1 + np.linalg.norm(x))


def test_deterministic_solve_iteration_cap(diag_quadratic):
    with pytest.raises(ConvergenceError):
        deterministic_solve(diag_quadratic.value, diag_quadratic.grad, np.zeros(5), 1.0, lip=16.0, max_iter=2)


def test_deterministic_solve_needs_strong_convexity(diag_quadratic):
    with pytest.raises(ValueError):
        deterministic_solve(diag_quadratic.value, diag_quadratic.grad, np.zeros(5), 0.0)


def test_gradient_mapping_without_prox_is_gradient(diag_quadratic):
    x = np.ones(5)
    assert gradient_mapping(diag_quadratic.grad, None, x, 0.5) == pytest.approx(diag_quadratic.grad(x))
    assert gradient_mapping(diag_quadratic.grad, lambda v, t: v, x, 0.5) == pytest.approx(diag_quadratic.grad(x))


def test_accelerated_minibatches_use_batch_map():
    base = quadratic_instance(np.diag([1.0, 4.0]), [1.0, -1.0], sigma=1.0)

    def refuse(x, gen):
        raise AssertionError("minibatch drawn one gradient at a time")

    problem = replace(base, stoch_grad=refuse)
    delta_init = gap(problem, np.zeros(2))
    point, samples = acc_sgd_oracle(problem, 1e-3 * delta_init, 0.0, delta_init, np.zeros(2), derive_rng(0))
    assert samples > 0
    assert np.all(np.isfinite(point))
