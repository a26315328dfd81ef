"""Closed-loop saccadic eye control with a gain-gated proprioceptive channel.

Loop, one step of length ``dt``::

    target x_H ----------------------------.
                                            v
    Kalman PPC --MAP--> motor processor --u--> eye plant --e_H--> delay d
        ^   ^                  |                                    |
        |   '------ u ---------+-- gate g(u) --> proprioception <---'
        '--------------- encoded e_H(t - d) at gain g --------------'

The gate drops proprioceptive gain to ``gate_floor`` for ``gate_window``
seconds after any nonzero command, so the stale signal from mid-saccade
never reaches the filter. The plant realises each saccade with a random
speed factor and moves slightly slower leftward than rightward, while the
forward model assumes the average gain. Without proprioception these errors
accumulate and the estimate drifts away from the eye.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kalman_ppc
from .errors import InvalidParameter
from .oracles import KalmanBelief, kalman_predict, kalman_update
from .popcode import TuningGrid, decode, encode, try_decode

_EPS = 1e-9


@dataclass(frozen=True)
class TaskConfig:
    target_levels: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    target_interval: float = 0.3
    init_duration: float = 2.0
    episode_duration: float = 30.0
    proprio_delay: float = 0.1
    gate_window: float = 0.1
    deadzone: float = 0.1
    max_speed: float = 20.0
    gate_floor: float = 1e-3
    gate_ceiling: float = 10.0
    # plant speed factor per saccade ~ Uniform(1 - jitter, 1), further scaled
    # by (1 - asymmetry) for leftward saccades
    saccade_gain_jitter: float = 0.1
    plant_asymmetry: float = 0.1
    process_noise: float = 0.05
    initial_gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "target_levels", tuple(float(v) for v in self.target_levels))
        bad = self.violations()
        if bad:
            err = InvalidParameter("; ".join(bad))
            err.problems = bad
            raise err

    def violations(self) -> list[str]:
        """Human-readable list of every constraint this config breaks."""
        bad = []

        def need(ok, name, what):
            if not ok:
                bad.append(f"{name}: {what} (got {getattr(self, name)!r})")

        finite = {k: v for k, v in asdict(self).items() if isinstance(v, (int, float))}
        for k, v in finite.items():
            if not math.isfinite(v):
                bad.append(f"{k}: must be finite (got {v!r})")
        need(len(self.target_levels) >= 1, "target_levels", "needs at least one level")
        need(self.target_interval > 0, "target_interval", "must be > 0")
        need(self.init_duration >= 0, "init_duration", "must be >= 0")
        need(self.episode_duration > self.init_duration, "episode_duration",
             "must exceed init_duration")
        need(0.06 - _EPS <= self.proprio_delay <= 0.1 + _EPS, "proprio_delay",
             "must lie in [0.06, 0.1] s")
        need(self.gate_window > 0, "gate_window", "must be > 0")
        need(self.deadzone > 0, "deadzone", "must be > 0")
        need(self.max_speed > 0, "max_speed", "must be > 0")
        need(self.gate_floor > 0, "gate_floor", "must be > 0")
        need(self.gate_ceiling > self.gate_floor, "gate_ceiling", "must exceed gate_floor")
        need(0 <= self.saccade_gain_jitter < 1, "saccade_gain_jitter", "must lie in [0, 1)")
        need(0 <= self.plant_asymmetry < 1, "plant_asymmetry", "must lie in [0, 1)")
        need(self.process_noise > 0, "process_noise", "must be > 0")
        need(self.initial_gain > 0, "initial_gain", "must be > 0")
        return bad

    @property
    def mean_plant_gain(self) -> float:
        """Plant gain averaged over jitter and direction; the forward model
        assumes this value."""
        return (1.0 - 0.5 * self.saccade_gain_jitter) * (1.0 - 0.5 * self.plant_asymmetry)


class TargetProcess:
    """Piecewise-constant target: 0 during initialisation, then a uniform
    draw from ``target_levels`` at every ``target_interval`` boundary."""

    def __init__(self, config: TaskConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self._draws: list[float] = []

    def interval_index(self, t: float) -> int:
        """-1 during initialisation, else the index of the current interval."""
        c = self.config
        if t < c.init_duration - _EPS:
            return -1
        return int(math.floor((t - c.init_duration) / c.target_interval + _EPS))

    def step(self, t: float) -> float:
        if t < 0:
            raise InvalidParameter("t must be >= 0")
        idx = self.interval_index(t)
        if idx < 0:
            return 0.0
        levels = self.config.target_levels
        while len(self._draws) <= idx:
            self._draws.append(levels[int(self.rng.integers(len(levels)))])
        return self._draws[idx]


def target_step(config: TaskConfig, t: float, rng: np.random.Generator) -> float:
    """Target value at ``t`` for a fresh schedule drawn from ``rng``."""
    return TargetProcess(config, rng).step(t)


def motor_command(target: float, eye_estimate: float, config: TaskConfig) -> float:
    """Bang-bang command with a deadzone of half-width ``config.deadzone``."""
    diff = target - eye_estimate
    if abs(diff) < config.deadzone:
        return 0.0
    return math.copysign(config.max_speed, diff)


def gate_gain(
    last_nonzero_command_time: Optional[float],
    t: float,
    config: TaskConfig,
    initializing: bool = False,
) -> float:
    if t < 0:
        raise InvalidParameter("t must be >= 0")
    if initializing or t < config.init_duration - _EPS:
        return config.gate_ceiling
    if last_nonzero_command_time is not None and (
        t - last_nonzero_command_time < config.gate_window - _EPS
    ):
        return config.gate_floor
    return config.gate_ceiling


def delayed_position(history: np.ndarray, k: int, delay_steps: int) -> float:
    """Eye position ``delay_steps`` before step ``k``; before the record
    starts, the first recorded position."""
    return float(history[max(k - delay_steps, 0)])


def proprio_encode(
    history: np.ndarray,
    k: int,
    dt: float,
    gain: float,
    grid: TuningGrid,
    rng: np.random.Generator,
    delay: float,
):
    """Encode the eye position ``delay`` seconds before step ``k``."""
    stale = delayed_position(history, k, int(round(delay / dt)))
    return encode(grid, stale, gain, dt, rng, time=k * dt)


@dataclass
class EpisodeTrace:
    """Per-step record of one closed-loop episode (arrays indexed by step)."""

    time: np.ndarray
    target: np.ndarray
    eye: np.ndarray
    command: np.ndarray
    gate_gain: np.ndarray
    delayed_eye: np.ndarray
    proprio_mean: np.ndarray
    proprio_var: np.ndarray
    proprio_degenerate: np.ndarray
    kalman_mean: np.ndarray
    kalman_var: np.ndarray
    oracle_mean: np.ndarray
    oracle_var: np.ndarray
    population_total: np.ndarray
    config: TaskConfig
    seed: int
    ablation: bool
    dt: float
    estimator: str = "ppc"
    clamped: int = 0

    @property
    def n_steps(self) -> int:
        return self.time.size

    @property
    def init_steps(self) -> int:
        return int(round(self.config.init_duration / self.dt))

    def jump_steps(self) -> np.ndarray:
        """Step indices (after initialisation) at which the target changes."""
        jumps = np.flatnonzero(np.diff(self.target) != 0) + 1
        return jumps[jumps >= self.init_steps]


def tracking_fraction(trace: EpisodeTrace, tolerance: float = 0.5, exclude: float = 0.15) -> float:
    """Fraction of post-initialisation steps with ``|eye - target| <= tolerance``,
    ignoring ``exclude`` seconds after each target jump."""
    keep = np.zeros(trace.n_steps, dtype=bool)
    keep[trace.init_steps:] = True
    n_ex = int(round(exclude / trace.dt))
    for j in trace.jump_steps():
        keep[j:j + n_ex] = False
    err = np.abs(trace.eye - trace.target)[keep]
    return float(np.mean(err <= tolerance))


def mean_tracking_error(trace: EpisodeTrace, start: float, stop: Optional[float] = None) -> float:
    sel = trace.time >= start - _EPS
    if stop is not None:
        sel &= trace.time < stop - _EPS
    return float(np.mean(np.abs(trace.eye - trace.target)[sel]))


def episode_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent target, proprioception and plant streams.

    Gated and ablated runs with one seed therefore see the same targets.
    """
    ss = np.random.SeedSequence(int(seed))
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


def run_episode(
    config: TaskConfig,
    seed: int,
    ablation: bool = False,
    dt: float = 1e-3,
    grid: Optional[TuningGrid] = None,
    estimator: str = "ppc",
) -> EpisodeTrace:
    """Simulate one episode.

    ``estimator="oracle"`` closes the loop through the exact Kalman filter
    instead of the network (both are always computed and recorded).
    """
    if estimator not in ("ppc", "oracle"):
        raise InvalidParameter(f"unknown estimator {estimator!r}")
    if not dt > 0:
        raise InvalidParameter("dt must be > 0")
    grid = grid if grid is not None else TuningGrid.uniform()
    c = config
    rng_target, rng_proprio, rng_plant = episode_rngs(seed)
    targets = TargetProcess(c, rng_target)

    model = kalman_ppc.KalmanModel(0.0, c.mean_plant_gain, c.process_noise, grid)
    weights = kalman_ppc.build_weights(model, grid, dt, max_control=c.max_speed)
    state = kalman_ppc.initial_state(grid, 0.0, c.initial_gain)
    belief = KalmanBelief(0.0, grid.tuning_width**2 / c.initial_gain)

    n = int(round(c.episode_duration / dt))
    init_steps = int(round(c.init_duration / dt))
    delay_steps = int(round(c.proprio_delay / dt))
    cols = {name: np.zeros(n) for name in (
        "time", "target", "eye", "command", "gate_gain", "delayed_eye", "proprio_mean",
        "proprio_var", "kalman_mean", "kalman_var", "oracle_mean", "oracle_var",
        "population_total")}
    degenerate = np.zeros(n, dtype=bool)

    eye = 0.0
    last_cmd: Optional[float] = None
    prev_u = 0.0
    speed_factor = 1.0
    lo, hi = grid.lo, grid.hi
    for k in range(n):
        t = k * dt
        init = k < init_steps
        x = targets.step(t)
        cols["eye"][k] = eye
        post = decode(grid, state.rates)
        est = post.mean if estimator == "ppc" else belief.mean
        u = 0.0 if init else motor_command(x, est, c)
        if u != 0.0:
            last_cmd = t
        if init:
            g = c.gate_ceiling
        elif ablation:
            g = c.gate_floor
        else:
            g = gate_gain(last_cmd, t, c)

        stale = delayed_position(cols["eye"], k, delay_steps)
        obs = encode(grid, stale, g, dt, rng_proprio, time=t)
        z = try_decode(grid, obs)

        cols["time"][k] = t
        cols["target"][k] = x
        cols["command"][k] = u
        cols["gate_gain"][k] = g
        cols["delayed_eye"][k] = stale
        cols["kalman_mean"][k] = post.mean
        cols["kalman_var"][k] = post.variance
        cols["oracle_mean"][k] = belief.mean
        cols["oracle_var"][k] = belief.variance
        cols["population_total"][k] = state.total
        if z is None:
            degenerate[k] = True
            cols["proprio_mean"][k] = np.nan
            cols["proprio_var"][k] = np.nan
        else:
            cols["proprio_mean"][k] = z.mean
            cols["proprio_var"][k] = z.variance

        state = kalman_ppc.step(state, weights, obs, u, dt)
        belief = kalman_predict(belief, model, u, dt)
        if z is not None:
            belief = kalman_update(belief, z.mean, z.variance)

        if u != 0.0 and (prev_u == 0.0 or math.copysign(1, u) != math.copysign(1, prev_u)):
            speed_factor = 1.0 - c.saccade_gain_jitter * rng_plant.random()
            if u < 0:
                speed_factor *= 1.0 - c.plant_asymmetry
        prev_u = u
        eye = min(max(eye + u * speed_factor * dt, lo), hi)

    return EpisodeTrace(
        proprio_degenerate=degenerate, config=c, seed=int(seed), ablation=ablation, dt=dt,
        estimator=estimator, clamped=state.clamped, **cols,
    )
