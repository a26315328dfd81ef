"""Scenario runners: simulate, then write ``<scenario>.csv``, a JSON header
sidecar ``<scenario>.json`` (resolved config, seed, columns, summary) and a
figure ``<scenario>.svg``."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Callable

import numpy as np

from .. import kalman_ppc, oculomotor, popcode, transform
from .config import ScenarioConfig
from .svg import Figure

EYE_COLUMNS = (
    "t", "target", "eye", "u", "gate_gain", "proprio_mean", "proprio_var",
    "proprio_degenerate", "kalman_mean", "kalman_var",
)
KALMAN_COLUMNS = (
    "t", "truth", "obs_gain", "obs_mean", "obs_var", "obs_degenerate", "kalman_mean",
    "kalman_var", "oracle_mean", "oracle_var", "population_total", "population_range",
)
POPULATION_COLUMNS = ("population", "neuron", "preferred", "expected_count", "count")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_header(path: Path, config: ScenarioConfig, columns, summary: dict) -> None:
    doc = {
        "config": config.to_dict(),
        "seed": config.seed,
        "columns": list(columns),
        "summary": {k: (None if isinstance(v, float) and math.isnan(v) else v)
                    for k, v in summary.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _nan_if(mask, values):
    out = np.array(values, float)
    out[mask] = np.nan
    return out


def _gaussian_curve(xs, mean, var):
    return np.exp(-0.5 * (xs - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)


def run_encode_demo(cfg: ScenarioConfig, out: Path) -> dict:
    c = cfg.encode_demo
    grid = cfg.grid.build()
    rng = np.random.default_rng(cfg.seed)
    expected = popcode.tuning_rate(grid, c.stimulus, c.gain) * c.window
    act = popcode.encode(grid, c.stimulus, c.gain, c.window, rng)
    post = popcode.try_decode(grid, act)
    rows = [("response", i, p, e, n)
            for i, (p, e, n) in enumerate(zip(grid.preferred_stimuli, expected, act.counts))]
    summary = {"stimulus": c.stimulus, "total_count": act.total,
               "posterior_mean": post.mean if post else float("nan"),
               "posterior_var": post.variance if post else float("nan"),
               "degenerate": post is None}
    write_csv(out / "encode-demo.csv", POPULATION_COLUMNS, rows)
    write_header(out / "encode-demo.json", cfg, POPULATION_COLUMNS, summary)

    fig = Figure("Static Poisson population code")
    top = fig.panel("Sampled response and tuning curves", "preferred stimulus", "count")
    xs = np.linspace(grid.lo, grid.hi, 400)
    for p in grid.preferred_stimuli[::3]:
        d = (xs - p) / grid.tuning_width
        top.line(xs, grid.rate_scale * c.gain * c.window * np.exp(-0.5 * d * d),
                 color="#bbbbbb", width=0.6)
    top.bars(grid.preferred_stimuli, act.counts, color="#1f77b4", label="spike counts")
    bottom = fig.panel("Decoded posterior", "stimulus", "density")
    if post is not None:
        bottom.line(xs, _gaussian_curve(xs, post.mean, post.variance), color="#1f77b4",
                    label="posterior")
    bottom.line([c.stimulus, c.stimulus], [0, 1.0 / math.sqrt(2 * math.pi * grid.tuning_width**2)],
                color="#d62728", label="stimulus")
    fig.save(out / "encode-demo.svg")
    return summary


def run_transform_demo(cfg: ScenarioConfig, out: Path) -> dict:
    c = cfg.transform_demo
    grid = cfg.grid.build()
    circuit = transform.TransformCircuit.matching(grid)
    rng = np.random.default_rng(cfg.seed)
    act_a = popcode.encode(grid, c.stimulus_a, c.gain_a, c.window, rng)
    act_b = popcode.encode(grid, c.stimulus_b, c.gain_b, c.window, rng)
    pa, pb = popcode.decode(grid, act_a), popcode.decode(grid, act_b)
    exact = transform.output_posterior(circuit, act_a, act_b)
    act_out = transform.transform(circuit, act_a, act_b, rng if c.stochastic else None)
    pout = popcode.try_decode(circuit.grid_out, act_out)

    rows = []
    for name, g, act, s, gain in (("a", grid, act_a, c.stimulus_a, c.gain_a),
                                  ("b", grid, act_b, c.stimulus_b, c.gain_b)):
        exp_counts = popcode.tuning_rate(g, s, gain) * c.window
        rows += [(name, i, p, e, n) for i, (p, e, n)
                 in enumerate(zip(g.preferred_stimuli, exp_counts, act.counts))]
    exp_out = popcode.expected_activity(circuit.grid_out, exact.mean, exact.gain).counts
    rows += [("out", i, p, e, n) for i, (p, e, n)
             in enumerate(zip(circuit.grid_out.preferred_stimuli, exp_out, act_out.counts))]
    summary = {
        "mean_a": pa.mean, "var_a": pa.variance, "gain_a": pa.gain,
        "mean_b": pb.mean, "var_b": pb.variance, "gain_b": pb.gain,
        "exact_mean": exact.mean, "exact_var": exact.variance,
        "expected_output_gain": transform.combine_gain(pa.gain, pb.gain),
        "output_mean": pout.mean if pout else float("nan"),
        "output_var": pout.variance if pout else float("nan"),
        "output_gain": act_out.total,
    }
    write_csv(out / "transform-demo.csv", POPULATION_COLUMNS, rows)
    write_header(out / "transform-demo.json", cfg, POPULATION_COLUMNS, summary)

    fig = Figure("Linear coordinate transform population code")
    top = fig.panel("Input responses", "preferred stimulus", "count")
    top.bars(grid.preferred_stimuli, act_a.counts, color="#1f77b4", label="input a")
    top.bars(grid.preferred_stimuli + 0.03, act_b.counts, color="#2ca02c", label="input b")
    s_sum = c.stimulus_a + c.stimulus_b
    top.line([s_sum, s_sum], [0, max(act_a.counts.max(), act_b.counts.max(), 1)],
             color="#8b0000", label="summed stimulus")
    bottom = fig.panel("Decoded posteriors", "stimulus", "density")
    xs = np.linspace(circuit.grid_out.lo / 1.5, circuit.grid_out.hi / 1.5, 600)
    bottom.line(xs, _gaussian_curve(xs, pa.mean, pa.variance), color="#1f77b4", label="a")
    bottom.line(xs, _gaussian_curve(xs, pb.mean, pb.variance), color="#2ca02c", label="b")
    if pout is not None:
        bottom.line(xs, _gaussian_curve(xs, pout.mean, pout.variance), color="#d62728",
                    label="a + b (decoded)")
    bottom.line(xs, _gaussian_curve(xs, exact.mean, exact.variance), color="#7f7f7f",
                label="exact convolution", width=0.8)
    fig.save(out / "transform-demo.svg")
    return summary


def run_kalman_demo(cfg: ScenarioConfig, out: Path) -> dict:
    c = cfg.kalman_demo
    grid = cfg.grid.build()
    model = kalman_ppc.KalmanModel(c.a, 0.0, c.q, grid)

    def gain_fn(t):
        return kalman_ppc.rectified_sine_gain(t, c.gain_period, c.gain_max, c.gain_min)

    r = kalman_ppc.run_diffusion(model, c.duration, cfg.dt, cfg.seed, gain_fn, grid,
                                 c.initial_gain)
    deg = r.obs_degenerate
    rows = zip(r.time, r.truth, r.obs_gain, r.obs_mean, r.obs_var, deg, r.ppc_mean, r.ppc_var,
               r.oracle_mean, r.oracle_var, r.population_total, r.population_range)
    write_csv(out / "kalman-demo.csv", KALMAN_COLUMNS, rows)
    summary = {
        "mean_abs_error_vs_oracle": float(np.mean(np.abs(r.ppc_mean - r.oracle_mean))),
        "max_var_ratio_vs_oracle": float(np.max(r.ppc_var / r.oracle_var)),
        "min_var_ratio_vs_oracle": float(np.min(r.ppc_var / r.oracle_var)),
        "mean_abs_error_vs_truth": float(np.mean(np.abs(r.ppc_mean - r.truth))),
        "degenerate_fraction": float(np.mean(deg)),
        "clamped": r.clamped,
    }
    write_header(out / "kalman-demo.json", cfg, KALMAN_COLUMNS, summary)

    fig = Figure("Kalman population code on a diffusion process")
    fig.panel("Input population gain", "time (s)", "gain", logy=True).line(
        r.time, r.obs_gain, color="#ff7f0e")
    p = fig.panel("Decoded input population", "time (s)", "stimulus")
    sd = np.sqrt(r.obs_var)
    p.band(r.time, r.obs_mean - 2 * sd, r.obs_mean + 2 * sd, color="#1f77b4")
    p.line(r.time, r.obs_mean, color="#1f77b4", label="input decode", width=0.6)
    p.line(r.time, r.truth, color="#000000", label="latent state")
    p = fig.panel("Kalman population activity", "time (s)", "rate")
    p.line(r.time, r.population_total / grid.size, color="#9467bd", label="mean rate")
    p.line(r.time, r.population_range, color="#2ca02c", label="max - min rate")
    p = fig.panel("Decoded Kalman population", "time (s)", "stimulus")
    sd = np.sqrt(r.ppc_var)
    p.band(r.time, r.ppc_mean - 2 * sd, r.ppc_mean + 2 * sd, color="#d62728")
    p.line(r.time, r.ppc_mean, color="#d62728", label="network decode")
    p.line(r.time, r.oracle_mean, color="#7f7f7f", label="exact Kalman", width=0.8)
    p.line(r.time, r.truth, color="#000000", label="latent state", width=0.8)
    fig.save(out / "kalman-demo.svg")
    return summary


def _eye_rows(tr: oculomotor.EpisodeTrace):
    return zip(tr.time, tr.target, tr.eye, tr.command, tr.gate_gain, tr.proprio_mean,
               tr.proprio_var, tr.proprio_degenerate, tr.kalman_mean, tr.kalman_var)


def _decode_panel(fig, title, tr):
    p = fig.panel(title, "time (s)", "position")
    sd = np.sqrt(tr.kalman_var)
    p.band(tr.time, tr.kalman_mean - 2 * sd, tr.kalman_mean + 2 * sd, color="#d62728")
    p.line(tr.time, tr.target, color="#000000", label="target", width=0.8)
    p.line(tr.time, tr.eye, color="#2ca02c", label="eye", width=0.8)
    p.line(tr.time, tr.kalman_mean, color="#d62728", label="Kalman decode", width=0.8)
    return p


def run_eye_control(cfg: ScenarioConfig, out: Path) -> dict:
    grid = cfg.grid.build()
    gated = oculomotor.run_episode(cfg.task, cfg.seed, False, cfg.dt, grid)
    ablated = oculomotor.run_episode(cfg.task, cfg.seed, True, cfg.dt, grid)
    trace = ablated if cfg.ablation else gated
    name = cfg.scenario
    write_csv(out / f"{name}.csv", EYE_COLUMNS, _eye_rows(trace))
    t_end = cfg.task.episode_duration
    summary = {
        "ablation": cfg.ablation,
        "tracking_fraction": oculomotor.tracking_fraction(trace),
        "final_5s_tracking_error": oculomotor.mean_tracking_error(trace, t_end - 5.0),
        "gate_open_fraction": float(np.mean(trace.gate_gain[trace.init_steps:]
                                            == cfg.task.gate_ceiling)),
        "kalman_var_post_init": float(trace.kalman_var[trace.init_steps]),
        "kalman_var_final": float(trace.kalman_var[-1]),
        "clamped": trace.clamped,
    }
    write_header(out / f"{name}.json", cfg, EYE_COLUMNS, summary)

    fig = Figure("Gain-gated saccadic eye control")
    fig.panel("1) Proprioceptive gain", "time (s)", "gain", logy=True).line(
        gated.time, gated.gate_gain, color="#ff7f0e")
    p = fig.panel("2) Decoded proprioception", "time (s)", "position")
    p.line(gated.time, gated.eye, color="#2ca02c", label="eye", width=0.8)
    p.line(gated.time, gated.proprio_mean, color="#1f77b4", label="proprioceptive decode",
           width=0.6)
    _decode_panel(fig, "3) Decoded Kalman population", gated)
    _decode_panel(fig, "4) Proprioception withheld after initialisation", ablated)
    fig.save(out / f"{name}.svg")
    return summary


RUNNERS: dict[str, Callable[[ScenarioConfig, Path], dict]] = {
    "encode-demo": run_encode_demo,
    "transform-demo": run_transform_demo,
    "kalman-demo": run_kalman_demo,
    "eye-control": run_eye_control,
    "ablation": run_eye_control,
}


def run_scenario(cfg: ScenarioConfig, out_dir) -> dict:
    """Run ``cfg.scenario`` and write its files under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.scenario](cfg, out)
