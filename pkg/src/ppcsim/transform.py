"""Linear coordinate transform ``x_R = x_H + e_H`` between population codes.

The output population encodes the convolution of the two input posteriors.
With a shared tuning width the output gain obeys two-input divisive
normalization, ``g_out = g_a * g_b / (g_a + g_b)``, which is the same
statement as "output variance = sum of input variances".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateActivity, InvalidParameter
from .popcode import (
    GaussianPosterior,
    PopulationActivity,
    TuningGrid,
    decode,
    expected_activity,
)


def combine_gain(g1: float, g2: float) -> float:
    """Divisively normalized gain of a two-input sum circuit."""
    if not (math.isfinite(g1) and math.isfinite(g2)) or g1 < 0 or g2 < 0:
        raise InvalidParameter("gains must be finite and >= 0")
    if g1 == 0 and g2 == 0:
        raise DegenerateActivity("both input gains are zero")
    return g1 * g2 / (g1 + g2)


@dataclass(frozen=True)
class TransformCircuit:
    grid_a: TuningGrid
    grid_b: TuningGrid
    grid_out: TuningGrid

    def __post_init__(self):
        lo = self.grid_a.lo + self.grid_b.lo
        hi = self.grid_a.hi + self.grid_b.hi
        tol = 1e-9 * max(1.0, abs(lo), abs(hi))
        if self.grid_out.lo > lo + tol or self.grid_out.hi < hi - tol:
            raise InvalidParameter(
                f"output grid [{self.grid_out.lo}, {self.grid_out.hi}] does not cover "
                f"the summed input range [{lo}, {hi}]"
            )

    @classmethod
    def matching(cls, grid: TuningGrid) -> "TransformCircuit":
        """Both inputs on ``grid``; output on a grid of the same spacing and
        tuning width spanning twice the range."""
        h = grid.spacing
        lo, hi = 2 * grid.lo, 2 * grid.hi
        n = int(round((hi - lo) / h)) + 1
        out = TuningGrid(np.linspace(lo, hi, n), grid.tuning_width, grid.rate_scale)
        return cls(grid, grid, out)


def output_posterior(
    circuit: TransformCircuit, act_a: PopulationActivity, act_b: PopulationActivity
) -> GaussianPosterior:
    """Exact posterior over the summed variable implied by the two inputs."""
    pa = decode(circuit.grid_a, act_a)
    pb = decode(circuit.grid_b, act_b)
    var = pa.variance + pb.variance
    gain = circuit.grid_out.tuning_width**2 / var
    return GaussianPosterior(pa.mean + pb.mean, var, gain)


def transform(
    circuit: TransformCircuit,
    act_a: PopulationActivity,
    act_b: PopulationActivity,
    rng: Optional[np.random.Generator] = None,
) -> PopulationActivity:
    """Encode the sum of the two inputs on ``circuit.grid_out``.

    Without ``rng`` the expected-count profile is returned, whose decode is
    exactly the convolved posterior. With ``rng`` the output counts are
    Poisson draws around that profile.
    """
    target = output_posterior(circuit, act_a, act_b)
    time = max(act_a.time, act_b.time)
    window = min(act_a.window, act_b.window)
    expected = expected_activity(circuit.grid_out, target.mean, target.gain, time, window)
    if rng is None:
        return expected
    return PopulationActivity(rng.poisson(expected.counts).astype(float), time, window)
