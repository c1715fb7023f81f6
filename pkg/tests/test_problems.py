import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from src.core.errors import ContractError, InvariantError
from src.core.oracles import gradient_mapping
from src.core.problem import GroundTruth
from src.core import problems
from src.core.problems import (
    Tail,
    _scaled_population,
    make_composite,
    make_composite_erm,
    make_nonneg_erm,
    make_quadratic,
    make_smoothed_regression,
    noise_mean_sampler,
    noise_sampler,
    quadratic_instance,
    true_gap,
)
from src.core.rng import derive_rng


def test_scalar_quadratic_gap():
    problem = make_quadratic(1, 1.0, 1.0, 0.0, seed=3)
    x_star = problem.require_ground_truth().minimizer
    assert true_gap(problem, x_star) == 0.0
    assert true_gap(problem, x_star + 1.0) == pytest.approx(0.5)


def test_spectrum_endpoints():
    problem = make_quadratic(20, 0.5, 50.0, 1.0, seed=1)
    eig = np.linalg.eigvalsh(problem.hessian)
    assert eig[0] == pytest.approx(0.5, abs=1e-9)
    assert eig[-1] == pytest.approx(50.0, abs=1e-9)


def test_gap_along_first_axis():
    problem = make_quadratic(4, 1.0, 9.0, 0.0, seed=2)
    e1 = np.eye(4)[0]
    gap = true_gap(problem, problem.require_ground_truth().minimizer + e1)
    assert gap == pytest.approx(0.5 * problem.hessian[0, 0])


def test_generators_are_deterministic():
    a, b = make_quadratic(6, 1.0, 30.0, 1.0, seed=9), make_quadratic(6, 1.0, 30.0, 1.0, seed=9)
    assert np.array_equal(a.hessian, b.hessian)
    assert np.array_equal(a.require_ground_truth().minimizer, b.require_ground_truth().minimizer)
    c, d = make_nonneg_erm(3, 100, 1.0, 10.0, seed=4), make_nonneg_erm(3, 100, 1.0, 10.0, seed=4)
    assert np.array_equal(c.population.hessian, d.population.hessian)
    assert c.min_value == d.min_value


@pytest.mark.parametrize("d, mu, lip", [(0, 1.0, 1.0), (3, 0.0, 1.0), (3, 2.0, 1.0)])
def test_invalid_quadratic_constants(d, mu, lip):
    with pytest.raises(ValueError):
        make_quadratic(d, mu, lip, 1.0)


def test_student_t_needs_finite_variance():
    with pytest.raises(ValueError):
        noise_sampler(3, 1.0, Tail.STUDENT_T, dof=2.0)


def test_gaussian_noise_variance():
    noise = noise_sampler(10, 2.0)
    gen = derive_rng(0).gen
    draws = np.array([noise(gen) for _ in range(50_000)])
    assert 3.8 <= float(np.mean(np.sum(draws ** 2, axis=1))) <= 4.2


def test_student_t_noise_variance_and_tails():
    gen = derive_rng(1).gen
    moderate = noise_sampler(10, 2.0, "student_t", dof=5.0)
    draws = np.array([moderate(gen) for _ in range(50_000)])
    assert 3.8 <= float(np.mean(np.sum(draws ** 2, axis=1))) <= 4.2
    heavy = noise_sampler(10, 2.0, "student_t")
    coords = np.concatenate([heavy(gen) for _ in range(20_000)])
    assert stats.kurtosis(coords, fisher=False) > 3.0


@pytest.mark.parametrize("kind", ["ball", "box", "l1"])
def test_composite_kkt_residual(kind):
    problem = make_composite(5, kind, 1.0, 10.0, 1.0, seed=7)
    truth = problem.require_ground_truth()
    smooth = problem.smooth
    residual = gradient_mapping(smooth.grad, problem.prox, truth.minimizer, 1.0 / smooth.lip_grad)
    assert np.linalg.norm(residual) <= 1e-10
    assert np.linalg.norm(truth.grad_at_min) > 1e-3


def test_composite_infeasible_point_has_infinite_gap():
    problem = make_composite(3, "ball", 1.0, 5.0, 0.0, seed=0)
    assert true_gap(problem, np.array([2.0, 0.0, 0.0])) == math.inf
    box = make_composite(3, "box", 1.0, 5.0, 0.0, seed=0, lo=-1.0, hi=1.0)
    assert true_gap(box, np.array([0.0, 1.5, 0.0])) == math.inf


def test_nonneg_erm_rejects_degenerate_population():
    with pytest.raises(ContractError):
        make_nonneg_erm(5, 3, 1.0, 10.0)


def test_smoothed_regression_truth():
    problem = make_smoothed_regression(3, 200, 0.1, 0.5, seed=1)
    truth = problem.population.require_ground_truth()
    assert np.linalg.norm(problem.population.grad(truth.minimizer)) <= 1e-8
    assert problem.lip_grad <= problem.lip_grad_hat
    assert problem.min_value > 0
    assert problem.population.sigma2 > 0


def test_true_gap_detects_wrong_minimum():
    problem = make_quadratic(2, 1.0, 2.0, 0.0, seed=0)
    truth = problem.require_ground_truth()
    broken = replace(problem, ground_truth=GroundTruth(truth.minimizer, truth.min_value + 1.0))
    with pytest.raises(InvariantError):
        true_gap(broken, truth.minimizer)


def test_batched_gaussian_gradient_has_reduced_variance():
    problem = quadratic_instance(np.diag([1.0, 4.0]), [0.0, 0.0], sigma=2.0)
    x = np.array([1.0, 1.0])
    gen = derive_rng(3).gen
    draws = np.array([problem.mean_stoch_grad(x, gen, 25) for _ in range(20_000)])
    se = draws.std(axis=0) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - problem.grad(x)) <= 5 * se)
    var = float(np.mean(np.sum((draws - problem.grad(x)) ** 2, axis=1)))
    assert var == pytest.approx(4.0 / 25, rel=0.05)


def test_student_t_batch_sums_in_chunks(monkeypatch):
    monkeypatch.setattr(problems, "GRAD_CHUNK", 7)
    mean = noise_mean_sampler(3, 2.0, "student_t", dof=5.0)
    single = noise_sampler(3, 2.0, "student_t", dof=5.0)
    gen_a, gen_b = derive_rng(4).gen, derive_rng(4).gen
    expected = sum(single(gen_b) for _ in range(5)) / 5
    assert mean(gen_a, 5) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("build", [
    lambda: make_nonneg_erm(3, 200, 1.0, 10.0, seed=2),
    lambda: make_smoothed_regression(3, 200, 0.1, 0.5, seed=2),
])
def test_population_batch_with_huge_batch_size(build):
    population = build().population
    x = np.ones(3)
    g = population.mean_stoch_grad(x, derive_rng(0).gen, 10 ** 9)
    exact = population.grad(x)
    assert np.linalg.norm(g - exact) <= 1e-2 * (1.0 + np.linalg.norm(exact))


def test_nonneg_erm_hits_target_condition_number():
    erm = make_nonneg_erm(10, 1000, 1.0, 200.0, seed=0, kappa=50.0)
    assert erm.lip_grad / erm.mu == pytest.approx(50.0, rel=1e-6)
    assert erm.lip_grad_hat == 200.0
    assert erm.min_value > 0
    rows = _scaled_population(10, 1000, 1.0, 200.0, 0, 0.5, 50.0).features
    assert np.sum(rows * rows, axis=1) + 1.0 == pytest.approx(np.full(1000, 200.0))


def test_composite_erm_hits_target_condition_number():
    erm = make_composite_erm(3, 300, 1.0, 50.0, seed=1, kappa=30.0)
    assert erm.lip_grad / erm.mu == pytest.approx(30.0, rel=1e-6)


@pytest.mark.parametrize("kappa", [1.5, 250.0])
def test_unreachable_population_kappa(kappa):
    with pytest.raises(ContractError):
        make_nonneg_erm(10, 1000, 1.0, 200.0, kappa=kappa)
