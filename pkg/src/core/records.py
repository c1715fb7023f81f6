"""Schedules, per-stage traces and per-trial records."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.core.errors import InvariantError


class Method(str, Enum):
    NAIVE_MARKOV = "naive-markov"
    BEST_OF_M = "best-of-m"
    ROBUST_DISTANCE = "robust-distance"
    PROXBOOST = "proxboost"
    BOOST_ERM = "boost-erm"
    BOOST_ERMC = "boost-ermc"
    BOOST_ALG = "boost-alg"
    BOOST_ALGC = "boost-algc"


@dataclass(frozen=True)
class Schedule:
    """Proximal continuation plan: amplitudes lambda_0..lambda_T (lambda_{-1} = 0 implicit)."""

    lambdas: Tuple[float, ...]
    T: int
    m: int
    delta: float
    p: float
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if self.T < 0 or len(self.lambdas) != self.T + 1:
            raise InvariantError(f"expected T+1={self.T + 1} amplitudes, got {len(self.lambdas)}")
        if self.m < 1:
            raise InvariantError(f"trial count must be positive, got {self.m}")
        if self.delta <= 0 or self.mu <= 0:
            raise InvariantError("delta and mu must be positive")
        if not 0.0 < self.p < 1.0:
            raise InvariantError(f"p must lie in (0, 1), got {self.p}")
        previous = 0.0
        for lam in self.lambdas:
            if lam <= previous:
                raise InvariantError(f"amplitudes must be positive and strictly increasing: {self.lambdas}")
            previous = lam

    def amplitude(self, j: int) -> float:
        """lambda_j with lambda_{-1} = 0."""
        return 0.0 if j < 0 else self.lambdas[j]

    def radius(self, j: int) -> float:
        """eps_j = sqrt(2 delta / (mu + lambda_j)), j >= -1."""
        return math.sqrt(2.0 * self.delta / (self.mu + self.amplitude(j)))

    @property
    def radii(self) -> List[float]:
        return [self.radius(j) for j in range(-1, self.T + 1)]

    @property
    def bound_factor(self) -> float:
        """1 + sum_i lambda_i / (mu + lambda_{i-1})."""
        return 1.0 + sum(self.lambdas[i] / (self.mu + self.amplitude(i - 1)) for i in range(self.T + 1))


@dataclass
class StageTrace:
    """Audit trail of one continuation run; stage j holds x_j and the data used to produce it.

    Stage 0 is initialization (lambda_{-1} = 0), stages 1..T the proximal
    iterations and stage T+1 the cleanup, so every list has T+2 entries.
    """

    centers: List[np.ndarray] = field(default_factory=list)
    radii: List[float] = field(default_factory=list)
    lambdas: List[float] = field(default_factory=list)
    init_bounds: List[Optional[float]] = field(default_factory=list)
    samples: List[int] = field(default_factory=list)
    exact_prox_minimizers: List[Optional[np.ndarray]] = field(default_factory=list)

    def add_stage(
        self,
        center: np.ndarray,
        radius: float,
        lam: float,
        samples: int,
        init_bound: Optional[float] = None,
        exact_minimizer: Optional[np.ndarray] = None,
    ) -> None:
        if samples < 0:
            raise InvariantError(f"negative sample count {samples}")
        self.centers.append(np.array(center, dtype=float, copy=True))
        self.radii.append(float(radius))
        self.lambdas.append(float(lam))
        self.init_bounds.append(None if init_bound is None else float(init_bound))
        self.samples.append(int(samples))
        self.exact_prox_minimizers.append(
            None if exact_minimizer is None else np.array(exact_minimizer, dtype=float, copy=True)
        )

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def total_samples(self) -> int:
        return int(sum(self.samples))

    @property
    def cumulative_samples(self) -> List[int]:
        return [int(v) for v in np.cumsum(self.samples)] if self.samples else []

    @property
    def final_point(self) -> np.ndarray:
        if not self.centers:
            raise InvariantError("empty trace")
        return self.centers[-1]

    def check_complete(self, T: int) -> None:
        sizes = {len(self.centers), len(self.radii), len(self.lambdas), len(self.init_bounds),
                 len(self.samples), len(self.exact_prox_minimizers)}
        if sizes != {T + 2}:
            raise InvariantError(f"trace lists must all have length {T + 2}, got {sorted(sizes)}")


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one macro-replication."""

    trial_id: int
    method: Method
    epsilon_target: float
    p: float
    T: int
    m: int
    final_gap: float
    samples_used: int
    wall_ms: int
    seed: int
    error: Optional[str] = None
    success: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "success", bool(self.final_gap <= self.epsilon_target))
