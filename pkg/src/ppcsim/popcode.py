"""Linear probabilistic population codes with Gaussian tuning.

A population of Poisson neurons with Gaussian tuning curves of common width
``sigma`` and a dense, uniform set of preferred stimuli encodes a scalar
stimulus. Under a flat prior the posterior given counts ``r`` is Gaussian::

    mean     = sum(r_i * pref_i) / sum(r_i)
    variance = sigma**2 / sum(r_i)

so the total count (the gain) is the precision in units of ``1 / sigma**2``.
The normalizer and the count-dependent base measure never have to be
evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateActivity, InvalidParameter

#: Smallest gain allowed for stochastic encoding, relative to unit gain.
GAIN_FLOOR = 1e-3


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TuningGrid:
    """Preferred stimuli, tuning width and peak rate of a population.

    ``rate_scale`` is the peak expected rate (spikes/s) of one neuron at unit
    gain.
    """

    preferred_stimuli: np.ndarray
    tuning_width: float
    rate_scale: float

    def __post_init__(self):
        prefs = _frozen(self.preferred_stimuli)
        object.__setattr__(self, "preferred_stimuli", prefs)
        if prefs.ndim != 1 or prefs.size < 2:
            raise InvalidParameter("preferred_stimuli needs at least 2 entries")
        if not np.all(np.isfinite(prefs)):
            raise InvalidParameter("preferred_stimuli must be finite")
        steps = np.diff(prefs)
        if np.any(steps <= 0):
            raise InvalidParameter("preferred_stimuli must be strictly increasing")
        h = steps.mean()
        if np.max(np.abs(steps - h)) > 1e-12 * max(h, np.max(np.abs(prefs))):
            raise InvalidParameter("preferred_stimuli must be uniformly spaced")
        if not (math.isfinite(self.tuning_width) and self.tuning_width > 0):
            raise InvalidParameter("tuning_width must be > 0")
        if self.tuning_width < h * (1 - 1e-12):
            raise InvalidParameter(
                f"tuning_width {self.tuning_width} is narrower than the grid spacing {h}"
            )
        if not (math.isfinite(self.rate_scale) and self.rate_scale >= 0):
            raise InvalidParameter("rate_scale must be finite and >= 0")

    @classmethod
    def uniform(
        cls,
        lo: float = -4.0,
        hi: float = 4.0,
        n: int = 50,
        tuning_width: float = 0.5,
        peak_rate: float = 50.0,
    ) -> "TuningGrid":
        """``n`` neurons evenly spanning ``[lo, hi]``."""
        if n < 2 or not hi > lo:
            raise InvalidParameter("need n >= 2 and hi > lo")
        return cls(np.linspace(lo, hi, n), tuning_width, peak_rate)

    @property
    def size(self) -> int:
        return self.preferred_stimuli.size

    @property
    def spacing(self) -> float:
        return float(self.preferred_stimuli[1] - self.preferred_stimuli[0])

    @property
    def lo(self) -> float:
        return float(self.preferred_stimuli[0])

    @property
    def hi(self) -> float:
        return float(self.preferred_stimuli[-1])

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class PopulationActivity:
    """Spike counts (or rate x window) of one population at ``time``."""

    counts: np.ndarray
    time: float = 0.0
    window: float = 1.0

    def __post_init__(self):
        counts = _frozen(self.counts)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 1:
            raise InvalidParameter("counts must be a vector")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise InvalidParameter("counts must be finite and nonnegative")
        if not self.window > 0:
            raise InvalidParameter("window must be > 0")
        if not self.time >= 0:
            raise InvalidParameter("time must be >= 0")

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def __add__(self, other: "PopulationActivity") -> "PopulationActivity":
        if self.counts.shape != other.counts.shape:
            raise InvalidParameter("activities have different sizes")
        return PopulationActivity(
            self.counts + other.counts, max(self.time, other.time), self.window + other.window
        )


@dataclass(frozen=True)
class GaussianPosterior:
    mean: float
    variance: float
    gain: float = 0.0

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise InvalidParameter(f"variance must be finite and > 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def precision(self) -> float:
        return 1.0 / self.variance


@dataclass(frozen=True)
class FlatPrior:
    pass


@dataclass(frozen=True)
class GaussianPrior:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidParameter("prior variance must be > 0")


PriorSpec = Union[FlatPrior, GaussianPrior]
FLAT = FlatPrior()


def _check_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise InvalidParameter(f"{name} must be finite, got {v}")


def tuning_rate(grid: TuningGrid, s: float, gain: float = 1.0) -> np.ndarray:
    """Expected rate of each neuron (spikes/s) for stimulus ``s``."""
    _check_finite(s=s, gain=gain)
    if gain < 0:
        raise InvalidParameter("gain must be >= 0")
    d = (s - grid.preferred_stimuli) / grid.tuning_width
    return gain * grid.rate_scale * np.exp(-0.5 * d * d)


def expected_activity(
    grid: TuningGrid, s: float, total: float, time: float = 0.0, window: float = 1.0
) -> PopulationActivity:
    """Noise-free tuning profile for ``s`` rescaled to sum exactly to ``total``."""
    _check_finite(s=s, total=total)
    if total <= 0:
        raise InvalidParameter("total must be > 0")
    d = (s - grid.preferred_stimuli) / grid.tuning_width
    profile = np.exp(-0.5 * d * d)
    mass = profile.sum()
    if mass == 0:
        raise InvalidParameter(f"stimulus {s} lies outside the grid's coverage")
    return PopulationActivity(profile * (total / mass), time, window)


def encode(
    grid: TuningGrid,
    s: float,
    gain: float,
    window: float,
    rng: np.random.Generator,
    time: float = 0.0,
    gain_floor: float = GAIN_FLOOR,
) -> PopulationActivity:
    """Draw independent Poisson counts over ``window`` seconds.

    Raises InvalidParameter if ``gain`` is below ``gain_floor``: Poisson
    sampling needs a strictly positive rate.
    """
    _check_finite(window=window)
    if window <= 0:
        raise InvalidParameter("window must be > 0")
    if gain < gain_floor:
        raise InvalidParameter(f"gain {gain} is below the floor {gain_floor}")
    lam = tuning_rate(grid, s, gain) * window
    return PopulationActivity(rng.poisson(lam).astype(float), time, window)


def fuse(a: GaussianPosterior, b: GaussianPosterior) -> GaussianPosterior:
    """Product of two Gaussian posteriors: precisions add."""
    pa, pb = a.precision, b.precision
    precision = pa + pb
    mean = (pa * a.mean + pb * b.mean) / precision
    return GaussianPosterior(mean, 1.0 / precision, a.gain + b.gain)


def decode(
    grid: TuningGrid, activity: PopulationActivity, prior: Optional[PriorSpec] = None
) -> GaussianPosterior:
    """Gaussian posterior over the stimulus given ``activity``.

    Raises DegenerateActivity when the population is silent.
    """
    r = activity.counts
    if r.shape != grid.preferred_stimuli.shape:
        raise InvalidParameter(f"activity has {r.size} neurons, grid has {grid.size}")
    total = float(r.sum())
    if total <= 0:
        raise DegenerateActivity("population is silent; posterior is undefined")
    mean = float(r @ grid.preferred_stimuli) / total
    post = GaussianPosterior(mean, grid.tuning_width**2 / total, total)
    if prior is None or isinstance(prior, FlatPrior):
        return post
    fused = fuse(post, GaussianPosterior(prior.mean, prior.variance))
    return GaussianPosterior(fused.mean, fused.variance, total)


def try_decode(grid: TuningGrid, activity: PopulationActivity) -> Optional[GaussianPosterior]:
    """Like :func:`decode` but returns None for silent activity."""
    try:
        return decode(grid, activity)
    except DegenerateActivity:
        return None


def map_estimate(posterior: GaussianPosterior) -> float:
    # mode of a Gaussian is its mean
    return posterior.mean
