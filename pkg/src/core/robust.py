"""Robust distance estimation under a pseudometric.

Points are indexed from 0.  ``weak_radius`` is the smallest radius whose ball
around a point covers a strict majority of the set; ``robust_select`` returns
the point with the smallest such radius and ``extract`` returns every index
whose radius is at most the median radius.  If a strict majority of points lie
within ``eps`` of some target, both outputs are within ``3 eps`` of it.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.core.problem import ProblemInstance, Vector
from src.core.rng import RngStream


class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    SCALED_EUCLIDEAN = "scaled_euclidean"
    LINEARIZED_BREGMAN = "linearized_bregman"


@dataclass(frozen=True)
class Pseudometric:
    kind: MetricKind
    eval: Callable[[Vector, Vector], float]
    scale: float = 1.0

    def __call__(self, x: Vector, y: Vector) -> float:
        return self.eval(x, y)

    def pairwise(self, points: Sequence[Vector]) -> np.ndarray:
        """Symmetric matrix of pairwise distances with a zero diagonal."""
        pts = _as_matrix(points)
        if self.kind != MetricKind.LINEARIZED_BREGMAN:
            diff = pts[:, None, :] - pts[None, :, :]
            return self.scale * np.sqrt(np.sum(diff * diff, axis=-1))
        m = pts.shape[0]
        dist = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                dist[i, j] = dist[j, i] = self.eval(pts[i], pts[j])
        return dist


def euclidean() -> Pseudometric:
    return Pseudometric(MetricKind.EUCLIDEAN, lambda x, y: float(np.linalg.norm(x - y)))


def scaled_euclidean(scale: float) -> Pseudometric:
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return Pseudometric(
        MetricKind.SCALED_EUCLIDEAN, lambda x, y: scale * float(np.linalg.norm(x - y)), scale=scale
    )


def linearized_bregman(h_value: Callable[[Vector], float], grad_estimate: Vector) -> Pseudometric:
    """|h(x) - h(x') + <grad_estimate, x - x'>| on dom h."""
    g = np.array(grad_estimate, dtype=float, copy=True)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient estimate must be finite")

    def rho(x, y):
        hx, hy = h_value(x), h_value(y)
        if not (np.isfinite(hx) and np.isfinite(hy)):
            return float("inf")
        return abs(hx - hy + float(g @ (x - y)))

    return Pseudometric(MetricKind.LINEARIZED_BREGMAN, rho)


def _as_matrix(points: Sequence[Vector]) -> np.ndarray:
    if len(points) == 0:
        raise ValueError("robust estimation needs at least one point")
    pts = np.asarray([np.atleast_1d(np.asarray(p, dtype=float)) for p in points])
    return pts


def _majority_radii(dist: np.ndarray) -> np.ndarray:
    # (floor(m/2)+1)-th smallest entry of each row; the row includes the zero self distance
    m = dist.shape[0]
    return np.sort(dist, axis=1)[:, m // 2]


def weak_radius(points: Sequence[Vector], i: int, rho: Pseudometric) -> float:
    """min{r >= 0 : |B_r(points[i])| > m/2}."""
    pts = _as_matrix(points)
    m = pts.shape[0]
    if not 0 <= i < m:
        raise IndexError(f"index {i} out of range for {m} points")
    row = np.array([0.0 if j == i else rho(pts[i], pts[j]) for j in range(m)])
    return float(np.sort(row)[m // 2])


def majority_radii(points: Sequence[Vector], rho: Pseudometric) -> np.ndarray:
    return _majority_radii(rho.pairwise(points))


def robust_select(points: Sequence[Vector], rho: Pseudometric) -> Tuple[int, Vector]:
    """Point with the smallest majority radius; ties go to the lowest index."""
    pts = _as_matrix(points)
    radii = _majority_radii(rho.pairwise(pts))
    best = int(np.argmin(radii))
    return best, pts[best]


def extract(points: Sequence[Vector], rho: Pseudometric) -> List[int]:
    """Indices whose majority radius is at most the ceil(m/2)-th smallest radius."""
    pts = _as_matrix(points)
    m = pts.shape[0]
    radii = _majority_radii(rho.pairwise(pts))
    median = np.sort(radii)[math.ceil(m / 2) - 1]
    return [i for i in range(m) if radii[i] <= median]


class RobustEstimate(NamedTuple):
    index: int
    point: Vector
    candidates: np.ndarray
    samples: int


def robust_distance_estimate(
    oracle: Callable[[RngStream], Tuple[Vector, int]],
    m: int,
    rng: RngStream,
    rho: Optional[Pseudometric] = None,
) -> RobustEstimate:
    """Query a weak distance oracle m times on independent children and robust-select."""
    if m < 1:
        raise ValueError(f"trial count must be positive, got {m}")
    rho = rho or euclidean()
    candidates, samples = [], 0
    for k in range(m):
        point, used = oracle(rng.child(k))
        candidates.append(np.asarray(point, dtype=float))
        samples += int(used)
    index, point = robust_select(candidates, rho)
    return RobustEstimate(index, point, np.asarray(candidates), samples)


def weak_gradient_batch(sigma2: float, eps: float) -> int:
    """s = ceil(3 sigma^2 / eps^2), at least one draw."""
    if eps <= 0:
        raise ValueError(f"gradient accuracy must be positive, got {eps}")
    return max(1, math.ceil(3.0 * sigma2 / eps ** 2))


class RobustGradient(NamedTuple):
    estimate: Vector
    samples: int
    batch: int


def robust_gradient(
    problem: ProblemInstance, x_hat: Vector, eps: float, m: int, rng: RngStream
) -> RobustGradient:
    """Robust estimate of grad g(x_hat) within 3 eps w.p. >= 1 - exp(-m/18)."""
    s = weak_gradient_batch(problem.sigma2, eps)
    x_hat = np.asarray(x_hat, dtype=float)

    def weak_query(stream: RngStream):
        return problem.mean_stoch_grad(x_hat, stream.gen, s), s

    est = robust_distance_estimate(weak_query, m, rng)
    logging.debug(f"robust gradient: m={m}, s={s}, selected query {est.index}")
    return RobustGradient(est.point, est.samples, s)
