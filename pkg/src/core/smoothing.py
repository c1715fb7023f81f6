"""Moreau-envelope smoothing of scalar losses (Huber-type closed forms)."""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


class ScalarLoss(str, Enum):
    ABS = "abs"        # |t|
    HINGE = "hinge"    # max(0, 1 - t)


def _original(fn: ScalarLoss) -> Callable[[ArrayLike], ArrayLike]:
    if fn == ScalarLoss.ABS:
        return np.abs
    return lambda t: np.maximum(0.0, 1.0 - np.asarray(t, dtype=float))


def _huber(u: np.ndarray, nu: float) -> Tuple[np.ndarray, np.ndarray]:
    a = np.abs(u)
    value = np.where(a <= nu, u * u / (2.0 * nu), a - nu / 2.0)
    deriv = np.where(a <= nu, u / nu, np.sign(u))
    return value, deriv


def _plus_envelope(u: np.ndarray, nu: float) -> Tuple[np.ndarray, np.ndarray]:
    # envelope of max(0, u)
    value = np.where(u <= 0, 0.0, np.where(u < nu, u * u / (2.0 * nu), u - nu / 2.0))
    deriv = np.where(u <= 0, 0.0, np.where(u < nu, u / nu, 1.0))
    return value, deriv


def moreau_envelope_scalar(fn, nu: float, t: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """(M_nu(t), M_nu'(t)) for M_nu(t) = min_s psi(s) + (t - s)^2 / (2 nu)."""
    if nu <= 0:
        raise ValueError(f"smoothing parameter must be positive, got {nu}")
    try:
        fn = ScalarLoss(fn)
    except ValueError:
        raise ValueError(f"unsupported loss {fn!r}; expected one of {[f.value for f in ScalarLoss]}") from None
    arr = np.asarray(t, dtype=float)
    if fn == ScalarLoss.ABS:
        value, deriv = _huber(arr, nu)
    else:
        value, deriv = _plus_envelope(1.0 - arr, nu)
        deriv = -deriv
    if np.ndim(t) == 0:
        return float(value), float(deriv)
    return value, deriv


@dataclass(frozen=True)
class SmoothedLoss:
    """Smoothed scalar loss with its constants: 1-Lipschitz, 1/nu-smooth."""

    original: Callable[[ArrayLike], ArrayLike]
    nu: float
    value: Callable[[ArrayLike], ArrayLike]
    derivative: Callable[[ArrayLike], ArrayLike]
    lip: float
    lip_grad: float


def smoothed_loss(fn, nu: float) -> SmoothedLoss:
    kind = ScalarLoss(fn)
    moreau_envelope_scalar(kind, nu, 0.0)  # validates nu
    return SmoothedLoss(
        original=_original(kind),
        nu=nu,
        value=lambda t: moreau_envelope_scalar(kind, nu, t)[0],
        derivative=lambda t: moreau_envelope_scalar(kind, nu, t)[1],
        lip=1.0,
        lip_grad=1.0 / nu,
    )
