"""A recurrent population that implements a scalar Kalman filter.

The state population ``x`` evolves as

    dx/dt = W x + u U x + M z - x * (Q x)

and is read out with the ordinary population-code decoder, so its total
activity ``G`` carries the precision ``G / sigma**2`` and its centre of mass
carries the mean. The matrices are built so the decoded statistics follow the
Kalman equations for ``dx/dt = a x + b u + noise(q)`` to first order in dt:

* ``Q = (q / sigma**2) * ones``: divisive suppression, ``dG/dt = -q G**2 / sigma**2``,
  which is exactly ``dVar/dt = q``. It rescales every neuron by the same
  factor so the mean is untouched.
* ``U = -b D`` with ``D`` a central difference: translates the activity
  profile at speed ``b u`` without changing its total.
* ``W = -2a I - a D diag(pref) + kappa L``: the model rate (dilation about
  zero plus the matching precision change) and a small Laplacian smoothing
  that keeps the explicit Euler step stable for advection. The Laplacian
  conserves total activity and centre of mass, so the decode ignores it.
* ``M``: observation counts mapped onto the state grid so one observation
  spike adds exactly one spike's worth of precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidParameter
from .popcode import GaussianPosterior, PopulationActivity, TuningGrid, decode, expected_activity


@dataclass(frozen=True)
class KalmanModel:
    a: float
    b: float
    q: float
    obs_grid: TuningGrid

    def __post_init__(self):
        for name in ("a", "b", "q"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameter(f"{name} must be finite")
        if self.q < 0:
            raise InvalidParameter("q must be >= 0")


@dataclass(frozen=True)
class NetworkWeights:
    W: np.ndarray
    U: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    dt: float
    smoothing: float = 0.0

    def __post_init__(self):
        n = self.W.shape[0]
        for name in ("W", "U", "Q"):
            if getattr(self, name).shape != (n, n):
                raise InvalidParameter(f"{name} must be {n}x{n}")
        if self.M.ndim != 2 or self.M.shape[0] != n:
            raise InvalidParameter(f"M must have {n} rows")

    @property
    def size(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class NetworkState:
    rates: PopulationActivity
    time: float = 0.0
    clamped: int = 0
    clamped_mass: float = 0.0
    spikes: Optional[np.ndarray] = None

    @property
    def total(self) -> float:
        return self.rates.total


def difference_matrix(n: int, h: float) -> np.ndarray:
    """Central first difference with zero activity outside the grid."""
    d = np.zeros((n, n))
    i = np.arange(n - 1)
    d[i, i + 1] = 1.0
    d[i + 1, i] = -1.0
    return d / (2 * h)


def laplacian_matrix(n: int, h: float) -> np.ndarray:
    lap = -2.0 * np.eye(n)
    i = np.arange(n - 1)
    lap[i, i + 1] = 1.0
    lap[i + 1, i] = 1.0
    return lap / (h * h)


def interpolation_matrix(src: np.ndarray, dest: np.ndarray) -> np.ndarray:
    """Map activity at ``src`` locations onto the uniform grid ``dest``.

    Each source unit is split linearly between its two neighbouring
    destination units, preserving total and centre of mass.
    """
    h = dest[1] - dest[0]
    pos = (src - dest[0]) / h
    if np.any(pos < -1e-9) or np.any(pos > dest.size - 1 + 1e-9):
        raise InvalidParameter("observation grid extends beyond the state grid")
    pos = np.clip(pos, 0, dest.size - 1)
    lo = np.minimum(np.floor(pos).astype(int), dest.size - 2)
    frac = pos - lo
    t = np.zeros((dest.size, src.size))
    cols = np.arange(src.size)
    t[lo, cols] += 1 - frac
    t[lo + 1, cols] += frac
    return t


def build_weights(
    model: KalmanModel, state_grid: TuningGrid, dt: float, max_control: float = 0.0
) -> NetworkWeights:
    """Network matrices for ``model`` on ``state_grid`` with Euler step ``dt``.

    ``max_control`` is the largest ``|u|`` the network will be driven with;
    it sets the stabilising smoothing.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameter("dt must be > 0")
    if abs(model.a) * dt >= 0.1:
        raise InvalidParameter(f"|a| dt = {abs(model.a) * dt} >= 0.1; reduce dt")
    prefs = state_grid.preferred_stimuli
    n, h = prefs.size, state_grid.spacing
    sigma2 = state_grid.tuning_width**2

    speed = max(abs(model.b) * abs(max_control), abs(model.a) * float(np.max(np.abs(prefs))))
    courant = speed * dt / h
    if courant >= 1:
        raise InvalidParameter(f"Courant number {courant:.3f} >= 1; reduce dt or max_control")
    kappa = 0.5 * speed * speed * dt

    D = difference_matrix(n, h)
    W = -2 * model.a * np.eye(n) - model.a * D @ np.diag(prefs) + kappa * laplacian_matrix(n, h)
    U = -model.b * D
    obs = model.obs_grid
    precision_ratio = sigma2 / obs.tuning_width**2
    if obs.size == n and np.allclose(obs.preferred_stimuli, prefs, rtol=0, atol=1e-12 * h):
        T = np.eye(n)
    else:
        T = interpolation_matrix(obs.preferred_stimuli, prefs)
    M = precision_ratio * T / dt
    Q = (model.q / sigma2) * np.ones((n, n))
    return NetworkWeights(W, U, M, Q, dt, kappa)


def initial_state(state_grid: TuningGrid, mean: float = 0.0, gain: float = 1.0) -> NetworkState:
    """State encoding ``N(mean, sigma**2 / gain)`` with a tuning-shaped profile."""
    return NetworkState(expected_activity(state_grid, mean, gain), 0.0)


def _obs_counts(obs, n_obs: int) -> Optional[np.ndarray]:
    if obs is None:
        return None
    counts = obs.counts if isinstance(obs, PopulationActivity) else np.asarray(obs, float)
    if counts.shape != (n_obs,):
        raise InvalidParameter(f"observation has shape {counts.shape}, expected ({n_obs},)")
    return counts


def step(
    state: NetworkState,
    weights: NetworkWeights,
    obs: Union[PopulationActivity, np.ndarray, None],
    u: float,
    dt: float,
    rng: Optional[np.random.Generator] = None,
) -> NetworkState:
    """One explicit Euler step; negative rates are clamped to zero.

    When ``rng`` is given the new state also carries Poisson spike counts
    emitted during the step (mean ``rate * dt``).
    """
    x = state.rates.counts
    if x.shape != (weights.size,):
        raise InvalidParameter(f"state has {x.size} units, weights expect {weights.size}")
    if not math.isclose(dt, weights.dt, rel_tol=1e-9):
        raise InvalidParameter(f"step dt {dt} differs from the weights' dt {weights.dt}")
    drift = weights.W @ x - x * (weights.Q @ x)
    if u != 0:
        drift += u * (weights.U @ x)
    counts = _obs_counts(obs, weights.M.shape[1])
    if counts is not None and counts.any():
        drift += weights.M @ counts
    new = x + dt * drift
    negative = new < 0
    n_clamped = int(negative.sum())
    mass = 0.0
    if n_clamped:
        mass = -float(new[negative].sum())
        new[negative] = 0.0
    t = state.time + dt
    spikes = rng.poisson(new * dt).astype(float) if rng is not None else None
    return NetworkState(
        PopulationActivity(new, t, state.rates.window),
        t,
        state.clamped + n_clamped,
        state.clamped_mass + mass,
        spikes,
    )


ObsStream = Union[Callable[[int, float], object], Sequence, np.ndarray, None]
ControlStream = Union[Callable[[int, float], float], Sequence[float], np.ndarray, float]


def run(
    model: KalmanModel,
    weights: NetworkWeights,
    obs_stream: ObsStream,
    control_stream: ControlStream,
    duration: float,
    dt: float,
    rng: Optional[np.random.Generator] = None,
    state_grid: Optional[TuningGrid] = None,
    initial: Optional[NetworkState] = None,
) -> list[tuple[NetworkState, GaussianPosterior]]:
    """Integrate the network for ``duration`` seconds.

    ``obs_stream`` and ``control_stream`` are either per-step sequences or
    callables ``f(step_index, time)``; a ``None`` observation is an outage.
    The state grid defaults to the observation grid. The returned list holds
    the state and its decode after every step.
    """
    grid = state_grid if state_grid is not None else model.obs_grid
    n_steps = int(round(duration / dt))
    state = initial if initial is not None else initial_state(grid)

    def obs_at(k, t):
        if obs_stream is None:
            return None
        return obs_stream(k, t) if callable(obs_stream) else obs_stream[k]

    def u_at(k, t):
        if callable(control_stream):
            return float(control_stream(k, t))
        if np.ndim(control_stream) == 0:
            return float(control_stream)
        return float(control_stream[k])

    out = []
    for k in range(n_steps):
        t = k * dt
        state = step(state, weights, obs_at(k, t), u_at(k, t), dt, rng)
        out.append((state, decode(grid, state.rates)))
    return out


def rectified_sine_gain(t: float, period: float, g_max: float, g_min: float) -> float:
    """``g_max * sin(2 pi t / period)`` floored at ``g_min``: high for the first
    half of each period, at the floor for the second half."""
    return max(g_max * math.sin(2 * math.pi * t / period), g_min)


def low_gain_windows(time: np.ndarray, gain: np.ndarray, g_min: float) -> list[slice]:
    """Maximal runs of steps with the gain at its floor."""
    low = gain <= g_min * (1 + 1e-12)
    edges = np.diff(np.r_[0, low.astype(int), 0])
    return [slice(a, b) for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1))]


@dataclass
class DiffusionRun:
    """Arrays (one entry per step) from :func:`run_diffusion`."""

    time: np.ndarray
    truth: np.ndarray
    obs_gain: np.ndarray
    obs_total: np.ndarray
    obs_mean: np.ndarray
    obs_var: np.ndarray
    ppc_mean: np.ndarray
    ppc_var: np.ndarray
    oracle_mean: np.ndarray
    oracle_var: np.ndarray
    population_total: np.ndarray
    population_range: np.ndarray
    clamped: int = 0
    spikes: Optional[np.ndarray] = None

    @property
    def obs_degenerate(self) -> np.ndarray:
        return self.obs_total == 0


def run_diffusion(
    model: KalmanModel,
    duration: float,
    dt: float,
    seed: int,
    gain_fn: Callable[[float], float],
    state_grid: Optional[TuningGrid] = None,
    initial_gain: float = 1.0,
    spiking: bool = False,
) -> DiffusionRun:
    """Track a latent ``dx = a x dt + sqrt(q) dW`` from Poisson observations
    whose gain follows ``gain_fn(t)``, with the network and, in parallel, the
    exact Kalman filter fed the very same spikes.

    Row ``k`` holds the latent state and observation at ``t_k`` and both
    filters' posteriors after absorbing that observation.
    """
    from .oracles import KalmanBelief, kalman_predict, kalman_update
    from .popcode import encode, try_decode

    grid = state_grid if state_grid is not None else model.obs_grid
    obs_grid = model.obs_grid
    weights = build_weights(model, grid, dt)
    ss = np.random.SeedSequence(int(seed))
    rng_latent, rng_obs, rng_spikes = (np.random.default_rng(s) for s in ss.spawn(3))
    state = initial_state(grid, 0.0, initial_gain)
    belief = KalmanBelief(0.0, grid.tuning_width**2 / initial_gain)

    n = int(round(duration / dt))
    cols = {k: np.zeros(n) for k in (
        "time", "truth", "obs_gain", "obs_total", "obs_mean", "obs_var", "ppc_mean", "ppc_var",
        "oracle_mean", "oracle_var", "population_total", "population_range")}
    spikes = np.zeros((n, grid.size)) if spiking else None
    x = 0.0
    noise = math.sqrt(model.q * dt)
    for k in range(n):
        t = k * dt
        g = gain_fn(t)
        obs = encode(obs_grid, x, g, dt, rng_obs, time=t)
        z = try_decode(obs_grid, obs)
        state = step(state, weights, obs, 0.0, dt, rng_spikes if spiking else None)
        post = decode(grid, state.rates)
        belief = kalman_predict(belief, model, 0.0, dt)
        if z is not None:
            belief = kalman_update(belief, z.mean, z.variance)
        r = state.rates.counts
        cols["time"][k] = t
        cols["truth"][k] = x
        cols["obs_gain"][k] = g
        cols["obs_total"][k] = obs.total
        cols["obs_mean"][k] = z.mean if z is not None else np.nan
        cols["obs_var"][k] = z.variance if z is not None else np.nan
        cols["ppc_mean"][k] = post.mean
        cols["ppc_var"][k] = post.variance
        cols["oracle_mean"][k] = belief.mean
        cols["oracle_var"][k] = belief.variance
        cols["population_total"][k] = r.sum()
        cols["population_range"][k] = r.max() - r.min()
        if spiking:
            spikes[k] = state.spikes
        x += dt * model.a * x + noise * rng_latent.standard_normal()
    return DiffusionRun(clamped=state.clamped, spikes=spikes, **cols)
