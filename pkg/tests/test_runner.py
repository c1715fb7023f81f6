import math
import os
from dataclasses import replace

import numpy as np
import pytest

from src.core.engine import trials_for
from src.core.erm import boost_erm_sample_total
from src.core.problems import ConstraintKind, Tail, true_gap
from src.core.records import Method
from src.harness import runner
from src.harness.runconfig import Family, ProblemSpec, RunConfig, load_config
from src.harness.runner import (
    build_problem,
    calibrate,
    nominal_failure,
    plan,
    run_trial,
    run_trials,
    start_point,
    summarize,
    target_accuracy,
)

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

SMALL = RunConfig(
    problem=ProblemSpec(family=Family.QUADRATIC, d=2, mu=1.0, lip_grad=4.0, sigma=0.1),
    method=Method.BOOST_ALG,
    epsilon=0.01,
    T=1,
    m=3,
    replications=4,
    seed=11,
)


def unmasked(records):
    return [replace(r, wall_ms=0) for r in records]


def test_small_run_is_reproducible():
    a = run_trials(SMALL, jobs=1)
    b = run_trials(SMALL, jobs=1)
    assert unmasked(a) == unmasked(b)
    assert [r.trial_id for r in a] == list(range(4))
    for r in a:
        assert r.error is None
        assert (r.T, r.m) == (1, 3)
        assert r.samples_used > 0
        assert math.isfinite(r.final_gap)


def test_parallel_run_matches_sequential():
    assert unmasked(run_trials(SMALL, jobs=2)) == unmasked(run_trials(SMALL, jobs=1))


def test_trials_use_independent_streams():
    a, b = run_trial(SMALL, 0), run_trial(SMALL, 1)
    assert a.final_gap != b.final_gap


def test_single_replication_reproduces_trial():
    one = replace(SMALL, replications=1)
    assert unmasked(run_trials(one)) == unmasked([run_trial(SMALL, 0)])


def test_errors_are_recorded(monkeypatch):
    def boom(*args):
        raise RuntimeError("boom")

    monkeypatch.setattr(runner, "execute", boom)
    record = run_trial(SMALL, 0)
    assert record.error == "RuntimeError: boom"
    assert record.final_gap == math.inf
    assert record.samples_used == 0
    assert record.success is False
    report = summarize(SMALL, [record])
    assert report.failures == 1 and report.errors == 1


def test_relative_target():
    config = replace(SMALL, relative=True, epsilon=0.5)
    problem = build_problem(config.problem)
    x_in = start_point(problem)
    assert np.array_equal(x_in, np.zeros(2))
    assert target_accuracy(config, problem) == pytest.approx(0.5 * true_gap(problem, x_in))
    assert target_accuracy(SMALL, problem) == 0.01


def test_composite_start_point_is_feasible():
    spec = ProblemSpec(family=Family.COMPOSITE, d=3, kind=ConstraintKind.BOX, lo=0.5, hi=1.0)
    problem = build_problem(spec)
    assert np.allclose(start_point(problem), 0.5)


def test_plans_and_nominal_failure():
    problem = build_problem(SMALL.problem)
    naive = replace(SMALL, method=Method.NAIVE_MARKOV)
    assert plan(naive, problem) == (0, 1)
    assert nominal_failure(naive, problem)[0] == pytest.approx(1 / 3)
    best = replace(SMALL, method=Method.BEST_OF_M, m=None)
    assert plan(best, problem) == (0, trials_for(0.1)) == (0, 42)
    assert nominal_failure(best, problem)[0] is None
    boost = replace(SMALL, T=None, m=None)
    assert plan(boost, problem) == (2, trials_for(0.1, 4))
    prox = replace(SMALL, method=Method.PROXBOOST)
    assert nominal_failure(prox, problem)[0] == pytest.approx(0.3)


@pytest.mark.parametrize("method", [Method.NAIVE_MARKOV, Method.BEST_OF_M, Method.ROBUST_DISTANCE, Method.PROXBOOST])
def test_quadratic_methods_run(method):
    config = replace(SMALL, method=method, m=3, replications=2)
    records = run_trials(config)
    assert all(r.error is None and r.method == method for r in records)


def test_boost_erm_target_and_samples():
    config = RunConfig(
        problem=ProblemSpec(family=Family.NONNEG_ERM, d=2, n_pop=100, lip_hat=10.0),
        method=Method.BOOST_ERM,
        gamma=0.5,
        T=1,
        m=3,
        replications=1,
    )
    problem = build_problem(config.problem)
    assert target_accuracy(config, problem) == pytest.approx(0.5 * problem.min_value)
    record = run_trial(config, 0)
    assert record.error is None
    delta = 0.5 / 4
    assert record.samples_used == boost_erm_sample_total(problem, delta, (1.0, 2.0), 3)


def test_calibration_quick():
    results = calibrate("sgd", replications=20, seed=1, settings=((1e-1, 0.0),))
    assert len(results) == 1
    r = results[0]
    assert (r.oracle, r.lam, r.replications) == ("sgd", 0.0, 20)
    assert 0 <= r.failures <= 20
    assert r.delta > 0 and r.mean_samples > 0
    assert calibrate("sgd", replications=20, seed=1, settings=((1e-1, 0.0),)) == results


def test_calibration_rejects_bad_arguments():
    with pytest.raises(ValueError):
        calibrate("adam")
    with pytest.raises(ValueError):
        calibrate("sgd", spec=ProblemSpec(family=Family.COMPOSITE))


@pytest.mark.slow
@pytest.mark.parametrize("oracle", ["sgd", "acc_sgd", "prox_sgd", "prox_acc_sgd"])
def test_oracle_calibration_contract(oracle):
    for r in calibrate(oracle, replications=1000):
        assert r.ok, r


def _acceptance(name, jobs=None):
    config = load_config(os.path.join(CONFIG_DIR, name))
    return summarize(config, run_trials(config, jobs=jobs or os.cpu_count()))


@pytest.mark.slow
def test_boost_alg_tail_bound():
    assert _acceptance("boost_alg.cfg").upper_95 <= 0.15


@pytest.mark.slow
def test_boost_algc_tail_bound():
    assert _acceptance("boost_algc.cfg").upper_95 <= 0.15


@pytest.mark.slow
def test_boost_erm_relative_error():
    config = load_config(os.path.join(CONFIG_DIR, "boost_erm.cfg"))
    records = run_trials(config, jobs=os.cpu_count())
    assert summarize(config, records).upper_95 <= 0.15
    problem = build_problem(config.problem)
    T, m = plan(config, problem)
    predicted = boost_erm_sample_total(problem, config.gamma / (2 + 2 * T), tuple(2.0 ** i for i in range(T + 1)), m)
    mean = np.mean([r.samples_used for r in records])
    assert predicted / 10 <= mean <= 10 * predicted


def test_heavy_tailed_default_calibration_problem():
    problem = build_problem(ProblemSpec(d=10, lip_grad=20.0, sigma=2.0, tail=Tail.STUDENT_T))
    assert problem.sigma2 == pytest.approx(4.0)


@pytest.mark.parametrize("family, method", [
    (Family.COMPOSITE, Method.BOOST_ALGC),
    (Family.COMPOSITE_ERM, Method.BOOST_ERMC),
])
def test_composite_plans_report_odd_trials(family, method):
    config = RunConfig(
        problem=ProblemSpec(family=family, d=2, lip_grad=4.0, sigma=0.1, n_pop=100, lip_hat=10.0, seed=2),
        method=method,
        epsilon=1.0,
        T=1,
        m=2,
        replications=1,
    )
    assert plan(config, build_problem(config.problem)) == (1, 3)
    record = run_trial(config, 0)
    assert record.error is None
    assert record.m == 3


def test_erm_config_pins_population_condition_number():
    config = load_config(os.path.join(CONFIG_DIR, "boost_erm.cfg"))
    assert config.problem.kappa == 50.0
    problem = build_problem(config.problem)
    assert problem.lip_grad / problem.mu == pytest.approx(50.0, rel=1e-6)
    assert problem.kappa_hat == pytest.approx(200.0)
