"""Run configuration: a flat ``key=value`` text format mapped onto dataclasses.

Example::

    # heavy-tailed BoostAlg run
    method=boost-alg
    epsilon=0.01
    relative=true
    p=0.1
    replications=300
    problem.family=quadratic
    problem.d=20
    problem.lip_grad=100
    problem.tail=student_t

Keys without a prefix set ``RunConfig`` fields, ``problem.`` keys set
``ProblemSpec`` fields.  ``#`` starts a comment line; quotes around a value are
stripped.  Unknown keys and unparsable values are errors.
"""

import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Dict, Optional, Union, get_args, get_origin

from src.config import CONFIG_ENV, DEFAULT_DOF, DEFAULT_REPLICATIONS, JOBS_ENV
from src.core.records import Method
from src.core.problems import ConstraintKind, Tail

PROBLEM_PREFIX = "problem."


class Family(str, Enum):
    QUADRATIC = "quadratic"
    COMPOSITE = "composite"
    NONNEG_ERM = "nonneg_erm"
    COMPOSITE_ERM = "composite_erm"
    SMOOTHED_REGRESSION = "smoothed_regression"


class OracleKind(str, Enum):
    SGD = "sgd"
    ACC_SGD = "acc_sgd"


# methods each family can run
SUPPORTED_METHODS = {
    Family.QUADRATIC: {
        Method.NAIVE_MARKOV, Method.BEST_OF_M, Method.ROBUST_DISTANCE, Method.PROXBOOST, Method.BOOST_ALG,
    },
    Family.COMPOSITE: {Method.NAIVE_MARKOV, Method.BOOST_ALGC},
    Family.NONNEG_ERM: {Method.BOOST_ERM},
    Family.SMOOTHED_REGRESSION: {Method.BOOST_ERM},
    Family.COMPOSITE_ERM: {Method.BOOST_ERMC},
}


@dataclass(frozen=True)
class ProblemSpec:
    family: Family = Family.QUADRATIC
    d: int = 10
    mu: float = 1.0
    lip_grad: float = 10.0
    sigma: float = 1.0
    tail: Tail = Tail.GAUSSIAN
    dof: float = DEFAULT_DOF
    kind: ConstraintKind = ConstraintKind.BALL
    radius: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    weight: float = 1.0
    n_pop: int = 1000
    lip_hat: float = 100.0
    nu: float = 0.1
    noise: float = 0.5
    kappa: Optional[float] = None  # target population L / mu for least-squares families
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    """One experiment: a problem, a method with its parameters, and R replications.

    ``epsilon`` is absolute unless ``relative`` is set, in which case it is a
    fraction of the initial gap f(x_in) - f*.  For ``boost-erm`` the target is
    the relative accuracy ``gamma`` and ``epsilon`` is ignored.
    """

    problem: ProblemSpec = field(default_factory=ProblemSpec)
    method: Method = Method.BOOST_ALG
    oracle: OracleKind = OracleKind.SGD
    epsilon: float = 0.01
    relative: bool = False
    p: float = 0.1
    gamma: float = 0.5
    T: Optional[int] = None
    m: Optional[int] = None
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    out: str = "output"
    jobs: Optional[int] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if self.epsilon <= 0 or self.gamma <= 0:
            raise ValueError("epsilon and gamma must be positive")
        if self.method not in SUPPORTED_METHODS[self.problem.family]:
            raise ValueError(
                f"method {self.method.value} is not available for {self.problem.family.value} problems"
            )
        if self.T is not None and self.T < 0:
            raise ValueError(f"T must be nonnegative, got {self.T}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.jobs is not None and self.jobs < 1:
            raise ValueError(f"jobs must be positive, got {self.jobs}")


def parse_config_text(text: str) -> Dict[str, str]:
    """KEY=VALUE lines to a dict; blank and ``#`` lines are skipped."""
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected KEY=VALUE, got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        val = val.strip()
        if (val.startswith('"') and val.endswith('"')) or (
            val.startswith("'") and val.endswith("'")
        ):
            val = val[1:-1]
        if not key:
            raise ValueError(f"line {number}: empty key")
        values[key] = val
    return values


def _convert(annotation, raw: str, key: str):
    if get_origin(annotation) is Union:
        if raw.lower() in ("", "none", "null"):
            return None
        annotation = next(a for a in get_args(annotation) if a is not type(None))
    try:
        if annotation is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if annotation is int:
            return int(raw)
        if annotation is float:
            return float(raw)
        if isinstance(annotation, type) and issubclass(annotation, Enum):
            return annotation(raw)
        return annotation(raw)
    except ValueError:
        raise ValueError(f"invalid value for {key}: {raw!r}") from None


def _field_map(cls) -> Dict[str, object]:
    return {f.name: f.type for f in fields(cls)}


def from_mapping(values: Dict[str, str], base: Optional[RunConfig] = None) -> RunConfig:
    """Apply string overrides to ``base`` (defaults if omitted)."""
    base = base or RunConfig()
    run_fields = _field_map(RunConfig)
    problem_fields = _field_map(ProblemSpec)
    run_updates, problem_updates = {}, {}
    for key, raw in values.items():
        if key.startswith(PROBLEM_PREFIX):
            name = key[len(PROBLEM_PREFIX):]
            if name not in problem_fields:
                raise ValueError(f"unknown config key {key!r}")
            problem_updates[name] = _convert(problem_fields[name], raw, key)
        else:
            if key not in run_fields or key == "problem":
                raise ValueError(f"unknown config key {key!r}")
            run_updates[key] = _convert(run_fields[key], raw, key)
    problem = replace(base.problem, **problem_updates)
    return replace(base, problem=problem, **run_updates)


def load_config(path: Optional[str] = None) -> RunConfig:
    """Read a config file; ``path`` falls back to the PROXBOOST_CONFIG variable."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        raise RuntimeError(f"Missing config file. Pass --config or set `{CONFIG_ENV}`.")
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return from_mapping(parse_config_text(f.read()))


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_mapping(config: RunConfig) -> Dict[str, str]:
    out = {}
    for f in fields(RunConfig):
        if f.name == "problem":
            continue
        out[f.name] = _format(getattr(config, f.name))
    for f in fields(ProblemSpec):
        out[PROBLEM_PREFIX + f.name] = _format(getattr(config.problem, f.name))
    return out


def serialize(config: RunConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in to_mapping(config).items())


def resolve_jobs(explicit: Optional[int] = None, config: Optional[RunConfig] = None) -> int:
    """Worker count: explicit value, config ``jobs``, PROXBOOST_JOBS, then 1."""
    if explicit is not None:
        jobs = explicit
    elif config is not None and config.jobs is not None:
        jobs = config.jobs
    else:
        raw = os.getenv(JOBS_ENV)
        try:
            jobs = int(raw) if raw else 1
        except ValueError:
            raise ValueError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ValueError(f"jobs must be positive, got {jobs}")
    return jobs
