"""Macro-replication runner.

Trial ``i`` of a run draws every random number from ``derive_rng(seed, [i])``,
so records do not depend on the worker that produced them.  Problems hold
closures and are rebuilt (once, cached) inside each worker process from their
``ProblemSpec``.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache, partial
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.composite import boost_algc, boost_ermc, odd_trials, proximal_subproblem
from src.core.engine import boost_alg, geometric_schedule, one_shot_robust, trials_for
from src.core.erm import ErmProblem, boost_erm
from src.core.oracles import acc_sgd_oracle, prox_acc_sgd_oracle, prox_sgd_oracle, sgd_oracle
from src.core.problem import CompositeProblem, ProblemInstance, with_proximal_term
from src.core.problems import (
    Tail,
    make_composite,
    make_composite_erm,
    make_nonneg_erm,
    make_quadratic,
    make_smoothed_regression,
    true_gap,
)
from src.core.records import Method, TrialRecord
from src.core.robust import weak_gradient_batch
from src.core.rng import RngStream, derive_rng
from src.harness.runconfig import Family, OracleKind, ProblemSpec, RunConfig, resolve_jobs
from src.utils.analyze import SummaryReport, clopper_pearson_upper, empirical_failure

Problem = Union[ProblemInstance, CompositeProblem, ErmProblem]


@lru_cache(maxsize=8)
def build_problem(spec: ProblemSpec) -> Problem:
    if spec.family == Family.QUADRATIC:
        return make_quadratic(spec.d, spec.mu, spec.lip_grad, spec.sigma, spec.tail, spec.seed, spec.dof)
    if spec.family == Family.COMPOSITE:
        return make_composite(
            spec.d, spec.kind, spec.mu, spec.lip_grad, spec.sigma, spec.tail, spec.seed,
            radius=spec.radius, lo=spec.lo, hi=spec.hi, weight=spec.weight, dof=spec.dof,
        )
    if spec.family == Family.NONNEG_ERM:
        return make_nonneg_erm(spec.d, spec.n_pop, spec.mu, spec.lip_hat, spec.seed, spec.noise, kappa=spec.kappa)
    if spec.family == Family.COMPOSITE_ERM:
        return make_composite_erm(
            spec.d, spec.n_pop, spec.mu, spec.lip_hat, spec.radius, spec.seed, spec.noise, kappa=spec.kappa
        )
    return make_smoothed_regression(spec.d, spec.n_pop, spec.nu, spec.mu, spec.seed, spec.noise)


def start_point(problem: Problem) -> np.ndarray:
    """x_in = 0, projected onto dom h for composite problems."""
    x = np.zeros(problem.dim)
    if isinstance(problem, CompositeProblem):
        return problem.prox(x, 1.0)
    return x


def target_accuracy(config: RunConfig, problem: Problem) -> float:
    """Absolute gap the trial must reach."""
    if config.method == Method.BOOST_ERM:
        return config.gamma * problem.min_value
    if config.relative:
        return config.epsilon * true_gap(problem, start_point(problem))
    return config.epsilon


def nominal_failure(config: RunConfig, problem: Problem) -> Tuple[Optional[float], str]:
    """(nominal failure probability, description of the bound under test)."""
    if config.method == Method.NAIVE_MARKOV:
        return 1.0 / 3.0, "single 2/3-confidence oracle call"
    if config.method == Method.BEST_OF_M:
        return None, "heuristic, no guarantee"
    if config.method == Method.PROXBOOST:
        T = plan(config, problem)[0]
        return min(1.0, (T + 2) * config.p), "(T+2)p with per-stage failure p"
    return config.p, f"{config.method.value} guarantee at total failure p"


def _streaming_oracle(config: RunConfig, problem: Problem):
    """MinimizationOracle (delta, lam, delta_init, center, rng) -> (point, samples)."""
    if isinstance(problem, CompositeProblem):
        fn = prox_sgd_oracle if config.oracle == OracleKind.SGD else prox_acc_sgd_oracle
    else:
        fn = sgd_oracle if config.oracle == OracleKind.SGD else acc_sgd_oracle
    return partial(fn, problem)


def _variant(method: Method) -> str:
    return method.value if method in (Method.PROXBOOST, Method.BOOST_ALGC, Method.BOOST_ERM, Method.BOOST_ERMC) \
        else "boost-alg"


def _strong_convexity(problem: Problem) -> Tuple[float, float]:
    if isinstance(problem, CompositeProblem):
        return problem.combined_mu, problem.lip_grad
    if isinstance(problem, ErmProblem):
        mu = problem.composite.combined_mu if problem.composite is not None else problem.mu
        return mu, problem.lip_grad
    return problem.mu, problem.lip_grad


def plan(config: RunConfig, problem: Problem) -> Tuple[int, int]:
    """(T, m) the method will use; composite methods run an odd number of trials."""
    if config.method == Method.NAIVE_MARKOV:
        return 0, 1
    if config.method in (Method.BEST_OF_M, Method.ROBUST_DISTANCE):
        return 0, config.m if config.m is not None else trials_for(config.p)
    mu, L = _strong_convexity(problem)
    eps = config.gamma if config.method == Method.BOOST_ERM else target_accuracy(config, problem)
    schedule = geometric_schedule(mu, L, eps, config.p, _variant(config.method), config.T, config.m)
    if config.method in (Method.BOOST_ALGC, Method.BOOST_ERMC):
        return schedule.T, odd_trials(schedule.m)
    return schedule.T, schedule.m


class TrialOutcome(NamedTuple):
    point: np.ndarray
    samples: int


def _best_of_m(config: RunConfig, problem: ProblemInstance, eps: float, rng: RngStream) -> TrialOutcome:
    """m oracle calls; keep the one with the smallest averaged stochastic gradient norm."""
    alg = _streaming_oracle(config, problem)
    x_in = start_point(problem)
    delta_in = max(true_gap(problem, x_in), eps)
    _, m = plan(config, problem)
    batch = weak_gradient_batch(problem.sigma2, math.sqrt(problem.mu * eps))
    best, best_norm, samples = None, math.inf, 0
    for k in range(m):
        stream = rng.child(k)
        point, used = alg(eps, 0.0, delta_in, x_in, stream.child(0))
        gen = stream.child(1).gen
        g = problem.mean_stoch_grad(point, gen, batch)
        samples += used + batch
        norm = float(np.linalg.norm(g))
        if norm < best_norm:
            best, best_norm = point, norm
    return TrialOutcome(best, samples)


def execute(config: RunConfig, problem: Problem, eps: float, rng: RngStream) -> TrialOutcome:
    """Run the configured method once."""
    method = config.method
    if method == Method.BOOST_ERM:
        T, m = plan(config, problem)
        schedule = geometric_schedule(problem.mu, problem.lip_grad, config.gamma, config.p, "boost-erm", T, m)
        x, trace = boost_erm(problem, schedule.delta, T, m, rng)
        return TrialOutcome(x, trace.total_samples)
    if method == Method.BOOST_ERMC:
        mu, L = _strong_convexity(problem)
        schedule = geometric_schedule(mu, L, eps, config.p, "boost-ermc", config.T, config.m)
        x, trace = boost_ermc(problem, schedule.delta, schedule.T, schedule.m, rng)
        return TrialOutcome(x, trace.total_samples)

    alg = _streaming_oracle(config, problem)
    x_in = start_point(problem)
    delta_in = max(true_gap(problem, x_in), eps)
    if method == Method.NAIVE_MARKOV:
        point, used = alg(eps, 0.0, delta_in, x_in, rng)
        return TrialOutcome(point, used)
    if method == Method.BEST_OF_M:
        return _best_of_m(config, problem, eps, rng)
    if method == Method.ROBUST_DISTANCE:
        est = one_shot_robust(alg, problem, eps, config.p, delta_in, x_in, rng, m=plan(config, problem)[1])
        return TrialOutcome(est.point, est.samples)
    mu, L = _strong_convexity(problem)
    schedule = geometric_schedule(mu, L, eps, config.p, _variant(method), config.T, config.m)
    if method == Method.BOOST_ALGC:
        x, trace = boost_algc(alg, problem, schedule, delta_in, x_in, rng)
    else:
        x, trace = boost_alg(alg, problem, schedule, delta_in, x_in, rng)
    return TrialOutcome(x, trace.total_samples)


def run_trial(config: RunConfig, trial_id: int) -> TrialRecord:
    problem = build_problem(config.problem)
    eps = target_accuracy(config, problem)
    T, m = plan(config, problem)
    rng = derive_rng(config.seed, [trial_id])
    started = time.perf_counter()
    error = None
    try:
        outcome = execute(config, problem, eps, rng)
        gap, samples = true_gap(problem, outcome.point), outcome.samples
    except Exception as e:
        logging.warning(f"trial {trial_id} failed: {e}")
        gap, samples, error = math.inf, 0, f"{type(e).__name__}: {e}"
    wall_ms = int(round(1000 * (time.perf_counter() - started)))
    return TrialRecord(
        trial_id=trial_id,
        method=config.method,
        epsilon_target=eps,
        p=config.p,
        T=T,
        m=m,
        final_gap=float(gap),
        samples_used=int(samples),
        wall_ms=wall_ms,
        seed=config.seed,
        error=error,
    )


def run_trials(config: RunConfig, jobs: Optional[int] = None) -> List[TrialRecord]:
    """R macro-replications in trial-id order, sequential or over a process pool."""
    jobs = resolve_jobs(jobs, config)
    ids = range(config.replications)
    logging.info(f"running {config.replications} trials of {config.method.value} with {jobs} job(s)")
    if jobs == 1:
        return [run_trial(config, i) for i in ids]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(partial(run_trial, config), ids, chunksize=max(1, config.replications // (4 * jobs))))


def summarize(config: RunConfig, records: Sequence[TrialRecord]) -> SummaryReport:
    problem = build_problem(config.problem)
    nominal, bound = nominal_failure(config, problem)
    return empirical_failure(records, nominal_p=nominal, bound=bound)


# --- Oracle calibration ---

CALIBRATION_ORACLES = {
    "sgd": (sgd_oracle, Family.QUADRATIC),
    "acc_sgd": (acc_sgd_oracle, Family.QUADRATIC),
    "prox_sgd": (prox_sgd_oracle, Family.COMPOSITE),
    "prox_acc_sgd": (prox_acc_sgd_oracle, Family.COMPOSITE),
}

# (delta as a fraction of the initial subproblem gap, lambda / mu)
CALIBRATION_SETTINGS = ((1e-1, 0.0), (1e-2, 1.0), (1e-3, 8.0))


@dataclass(frozen=True)
class CalibrationResult:
    oracle: str
    delta: float
    lam: float
    replications: int
    failures: int
    upper_99: float
    mean_samples: float

    @property
    def ok(self) -> bool:
        return self.upper_99 <= 0.40


def _calibration_case(oracle: str, spec: ProblemSpec, delta_frac: float, lam_ratio: float, seed: int, setting: int, i: int):
    fn, _ = CALIBRATION_ORACLES[oracle]
    problem = build_problem(spec)
    center = start_point(problem)
    if isinstance(problem, CompositeProblem):
        lam = lam_ratio * problem.combined_mu
        sub = proximal_subproblem(problem, lam, center, solve=True)
    else:
        lam = lam_ratio * problem.mu
        sub = with_proximal_term(problem, lam, center)
    delta_init = true_gap(sub, center)
    delta = delta_frac * delta_init
    point, used = fn(problem, delta, lam, delta_init, center, derive_rng(seed, [setting, i]))
    return true_gap(sub, point) > delta, used, delta, lam


def calibrate(
    oracle: str,
    spec: Optional[ProblemSpec] = None,
    replications: int = 1000,
    seed: int = 0,
    jobs: Optional[int] = None,
    settings: Sequence[Tuple[float, float]] = CALIBRATION_SETTINGS,
) -> List[CalibrationResult]:
    """Empirical P(gap > delta) of one oracle at each (delta, lambda) setting."""
    if oracle not in CALIBRATION_ORACLES:
        raise ValueError(f"unknown oracle {oracle!r}; expected one of {sorted(CALIBRATION_ORACLES)}")
    family = CALIBRATION_ORACLES[oracle][1]
    spec = spec or ProblemSpec(family=family, d=10, mu=1.0, lip_grad=20.0, sigma=2.0, tail=Tail.STUDENT_T)
    if spec.family != family:
        raise ValueError(f"oracle {oracle} needs a {family.value} problem, got {spec.family.value}")
    jobs = resolve_jobs(jobs)
    results = []
    for index, (delta_frac, lam_ratio) in enumerate(settings):
        task = partial(_calibration_case, oracle, spec, delta_frac, lam_ratio, seed, index)
        if jobs == 1:
            cases = [task(i) for i in range(replications)]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                cases = list(pool.map(task, range(replications)))
        failures = sum(1 for failed, *_ in cases if failed)
        delta, lam = cases[0][2], cases[0][3]
        result = CalibrationResult(
            oracle=oracle,
            delta=delta,
            lam=lam,
            replications=replications,
            failures=failures,
            upper_99=clopper_pearson_upper(failures, replications, 0.99),
            mean_samples=float(np.mean([used for _, used, *_ in cases])),
        )
        logging.info(f"calibrate {oracle}: delta={delta:.3g} lam={lam:g} failures={failures}/{replications}")
        results.append(result)
    return results
