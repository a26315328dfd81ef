"""Probabilistic population codes: Poisson encoding and decoding, gain
combination, a recurrent Kalman-filter population, and a gain-gated
closed-loop eye-control task."""

from .errors import DegenerateActivity, DegenerateBelief, InvalidParameter, PPCError
from .popcode import (
    GaussianPosterior,
    GaussianPrior,
    PopulationActivity,
    TuningGrid,
    decode,
    encode,
    expected_activity,
    fuse,
    map_estimate,
    tuning_rate,
)
from .transform import TransformCircuit, combine_gain, output_posterior

__version__ = "0.1.0"

__all__ = [
    "DegenerateActivity",
    "DegenerateBelief",
    "GaussianPosterior",
    "GaussianPrior",
    "InvalidParameter",
    "PPCError",
    "PopulationActivity",
    "TransformCircuit",
    "TuningGrid",
    "combine_gain",
    "decode",
    "encode",
    "expected_activity",
    "fuse",
    "map_estimate",
    "output_posterior",
    "tuning_rate",
]
