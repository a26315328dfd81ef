"""Reference estimators used to validate the population-code networks.

``kalman_predict`` / ``kalman_update`` are the scalar Kalman filter for
``dx/dt = a x + b u + noise`` discretised with a first-order step.
``grid_filter_step`` is a histogram (grid) Bayes filter that marginalises
through a transition kernel and multiplies in a likelihood, with no
Gaussian assumption at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import DegenerateBelief, InvalidParameter


@dataclass(frozen=True)
class KalmanBelief:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidParameter(f"variance must be > 0, got {self.variance}")


def kalman_predict(
    belief: KalmanBelief, model, u: float, dt: float
) -> KalmanBelief:
    """Propagate ``belief`` through ``dt`` seconds of the linear model.

    ``model`` needs attributes ``a``, ``b`` and ``q`` (see
    :class:`ppcsim.kalman_ppc.KalmanModel`).
    """
    if not dt > 0:
        raise InvalidParameter("dt must be > 0")
    mean = belief.mean + dt * (model.a * belief.mean + model.b * u)
    var = belief.variance + dt * (2 * model.a * belief.variance + model.q)
    return KalmanBelief(mean, var)


def kalman_update(belief: KalmanBelief, z_mean: float, z_variance: float) -> KalmanBelief:
    if not z_variance > 0:
        raise InvalidParameter("observation variance must be > 0")
    k = belief.variance / (belief.variance + z_variance)
    mean = belief.mean + k * (z_mean - belief.mean)
    var = belief.variance * z_variance / (belief.variance + z_variance)
    return KalmanBelief(mean, var)


@dataclass(frozen=True)
class GridBelief:
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if support.shape != weights.shape or support.ndim != 1:
            raise InvalidParameter("support and weights must be matching vectors")
        if np.any(weights < 0):
            raise InvalidParameter("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidParameter(f"weights sum to {weights.sum()}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_density(cls, support, density) -> "GridBelief":
        w = np.asarray(density, dtype=float)
        total = w.sum()
        if not total > 0:
            raise DegenerateBelief("density has no mass")
        return cls(support, w / total)

    @classmethod
    def gaussian(cls, support, mean: float, variance: float) -> "GridBelief":
        support = np.asarray(support, dtype=float)
        return cls.from_density(support, np.exp(-0.5 * (support - mean) ** 2 / variance))

    @classmethod
    def delta(cls, support, value: float) -> "GridBelief":
        support = np.asarray(support, dtype=float)
        w = np.zeros_like(support)
        w[np.argmin(np.abs(support - value))] = 1.0
        return cls(support, w)

    @property
    def mean(self) -> float:
        return float(self.weights @ self.support)

    @property
    def variance(self) -> float:
        d = self.support - self.mean
        return float(self.weights @ (d * d))


def default_support(lo: float = -6.0, hi: float = 6.0, n: int = 401) -> np.ndarray:
    return np.linspace(lo, hi, n)


def identity_kernel(support) -> np.ndarray:
    return np.eye(len(support))


def gaussian_kernel(support, shift: float = 0.0, variance: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Row-stochastic kernel ``K[i, j] = p(x_j | x_i)`` for
    ``x' = scale * x + shift + N(0, variance)``.

    Rows are renormalised on the grid; probability leaving the grid is
    dropped, so keep beliefs away from the edges.
    """
    support = np.asarray(support, dtype=float)
    if variance == 0:
        # deterministic map, distributed linearly between neighbouring cells
        k = np.zeros((support.size, support.size))
        dest = scale * support + shift
        h = support[1] - support[0]
        pos = np.clip((dest - support[0]) / h, 0, support.size - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, support.size - 1)
        frac = pos - lo
        rows = np.arange(support.size)
        np.add.at(k, (rows, lo), 1 - frac)
        np.add.at(k, (rows, hi), frac)
        return k
    centre = (scale * support + shift)[:, None]
    k = np.exp(-0.5 * (support[None, :] - centre) ** 2 / variance)
    sums = k.sum(axis=1, keepdims=True)
    if np.any(sums == 0):
        raise InvalidParameter("kernel variance too small for the grid")
    return k / sums


def gaussian_likelihood(z_mean: float, z_variance: float) -> Callable[[np.ndarray], np.ndarray]:
    def lik(x):
        return np.exp(-0.5 * (x - z_mean) ** 2 / z_variance)

    return lik


def grid_filter_step(
    belief: GridBelief,
    kernel: np.ndarray,
    likelihood: Optional[Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]] = None,
) -> GridBelief:
    """One predict/update cycle: marginalise through ``kernel``, then weight
    by ``likelihood`` (values on the support, or a callable) and renormalise.
    """
    kernel = np.asarray(kernel, dtype=float)
    n = belief.support.size
    if kernel.shape != (n, n):
        raise InvalidParameter(f"kernel must be {n}x{n}")
    if np.any(np.abs(kernel.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidParameter("kernel rows must sum to 1")
    predicted = belief.weights @ kernel
    if likelihood is not None:
        lik = likelihood(belief.support) if callable(likelihood) else np.asarray(likelihood, float)
        predicted = predicted * lik
    total = predicted.sum()
    if not total > 0 or not math.isfinite(total):
        raise DegenerateBelief("posterior has no mass on the grid")
    return GridBelief(belief.support, predicted / total)
