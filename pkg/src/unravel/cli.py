"""Command-line experiment runner.

    unravel --config run.cfg [--seed N] [--n-traj N] [--out DIR]
            [--threads N] [--dt X] [--paper-scale]

Ensemble presets write one CSV per policy with columns
``t, mean_sigma2_a, var_sigma2_a, ci95``; ``oracle_check`` also writes the
trace distance to the master-equation solution.  Kicked-oscillator presets
write one single-trajectory time series per scale and policy plus a summary
of the stationary statistics.  Every run writes a manifest that is itself a
valid config.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, hilbert, master
from .config import ExperimentConfig, format_config, initial_state, parse_config
from .ensemble import (EnsembleResult, Experiment, default_threads, ensemble_density, run_ensemble,
                       time_average)
from .errors import UnravelError
from .models import KickedOscillator, KickedOscillatorParams, apply_scaling
from .noise import rng_stream
from .policies import CorrelationPolicy, policy_slug
from .sde import LindbladChannel, SdeConfig, run_trajectory

CSV_HEADER = ("t", "mean_sigma2_a", "var_sigma2_a", "ci95")
SUMMARY_HEADER = ("lambda", "policy", "dim", "dt", "mean_sigma2_a", "var_sigma2_a",
                  "mean_stderr", "var_stderr", "mean_halving_error", "var_halving_error",
                  "mean_n", "stationarity_drift")
STATIONARY_WINDOW_PERIODS = 50


@dataclass
class KickedSummary:
    """Stationary statistics of one kicked-oscillator trajectory."""

    lam: float
    policy: CorrelationPolicy
    dim: int
    dt: float
    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float
    mean_halving_error: float
    variance_halving_error: float
    mean_n: float
    stationarity_drift: float
    times: np.ndarray = field(repr=False, default=None)
    sigma2: np.ndarray = field(repr=False, default=None)


@dataclass
class RunOutput:
    config: ExperimentConfig
    files: list[Path]
    ensembles: dict[str, EnsembleResult] = field(default_factory=dict)
    trace_distances: dict[str, np.ndarray] = field(default_factory=dict)
    kicked: list[KickedSummary] = field(default_factory=list)


def _fmt(x: float) -> str:
    return "%.17e" % x


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# ensemble presets

def _observable_operator(cfg: ExperimentConfig) -> np.ndarray:
    """Operator whose spread is reported; ``n`` for the hermitian benchmark, else ``a``."""
    if cfg.preset == "hermitian_rates":
        return hilbert.number(cfg.dim)
    return hilbert.annihilation(cfg.dim)


def build_experiment(cfg: ExperimentConfig, policy: CorrelationPolicy) -> Experiment:
    x = _observable_operator(cfg)
    a = hilbert.annihilation(cfg.dim)
    channel = LindbladChannel(math.sqrt(cfg.kappa) * x, policy)
    observables = {
        "sigma2_a": lambda s: hilbert.msd(x, s),
        "abs_cov_a": lambda s: np.abs(hilbert.covariance(x.conj().T, x, s)),
        "n": lambda s: np.real(hilbert.expectation(a.conj().T @ a, s)),
    }
    return Experiment([channel], SdeConfig(cfg.dt, scheme=cfg.scheme), cfg.t_final, observables,
                      output_stride=cfg.output_stride,
                      keep_states=cfg.preset == "oracle_check")


def _run_ensembles(cfg: ExperimentConfig, out: Path, threads: Optional[int]) -> RunOutput:
    psi0 = initial_state(cfg)
    result = RunOutput(cfg, [])
    rho_ref = None
    for policy in cfg.policy:
        exp = build_experiment(cfg, policy)
        # common random numbers: every policy sees the same noise streams
        res = run_ensemble(psi0, exp, cfg.n_traj, cfg.seed, threads=threads)
        result.ensembles[policy.label] = res
        rows = ((_fmt(t), _fmt(m), _fmt(v), _fmt(c)) for t, m, v, c in
                zip(res.times, np.real(res.mean["sigma2_a"]), res.variance["sigma2_a"],
                    res.ci95["sigma2_a"]))
        slug = policy_slug(policy)
        result.files.append(_write_csv(out / f"{cfg.preset}_{slug}.csv", CSV_HEADER, rows))
        if cfg.preset == "oracle_check":
            if rho_ref is None:
                _, rho_ref = master.evolve(psi0, cfg.t_final, None, [ch.op for ch in exp.channels],
                                           cfg.dt, output_stride=cfg.output_stride)
            dist = np.array([master.trace_distance(ensemble_density(res.states[:, i]), rho_ref[i])
                             for i in range(len(res.times))])
            result.trace_distances[policy.label] = dist
            result.files.append(_write_csv(
                out / f"{cfg.preset}_{slug}_trace_distance.csv", ("t", "trace_distance"),
                ((_fmt(t), _fmt(d)) for t, d in zip(res.times, dist))))
    return result


# ---------------------------------------------------------------------------
# kicked oscillator

def _kicked_job(cfg: ExperimentConfig, lam: float, dim: int, policy, dt: float):
    base = KickedOscillatorParams(cfg.beta0, cfg.tau1, cfg.tau2, cfg.chi, cfg.kappa)
    params = apply_scaling(base, lam) if lam != 1 else base
    model = KickedOscillator(params, dim)
    a = hilbert.annihilation(dim)
    n_op = a.conj().T @ a
    observables = {"sigma2_a": lambda s: hilbert.msd(a, s),
                   "n": lambda s: np.real(hilbert.expectation(n_op, s))}
    t_final = round(cfg.periods * params.period, 12)
    res = run_trajectory(hilbert.fock_state(dim, 0), t_final, model,
                         [LindbladChannel(model.channel_operator(), policy)],
                         SdeConfig(dt * lam, scheme=cfg.scheme), rng_stream(cfg.seed, 0),
                         observables, output_stride=cfg.output_stride * lam)
    period = params.period
    half = time_average(res.times, res.values["sigma2_a"], 0.5 * cfg.periods * period)
    n_avg = time_average(res.times, res.values["n"], 0.5 * cfg.periods * period)
    w = min(STATIONARY_WINDOW_PERIODS, cfg.periods // 4) * period
    t_end = res.times[-1]
    s2 = res.values["sigma2_a"]
    last = s2[res.times > t_end - w + 1e-9]
    prev = s2[(res.times > t_end - 2 * w + 1e-9) & (res.times <= t_end - w + 1e-9)]
    drift = abs(last.mean() - prev.mean()) if len(last) and len(prev) else math.nan
    return res.times, s2, half, n_avg.mean, drift


def _run_kicked(cfg: ExperimentConfig, out: Path, threads: Optional[int]) -> RunOutput:
    jobs = []
    for lam, dim in zip(cfg.lambdas, cfg.dims):
        for policy in cfg.policy:
            jobs.append((lam, dim, policy, cfg.dt))
            if cfg.dt_halving:
                jobs.append((lam, dim, policy, cfg.dt / 2))
    threads = default_threads() if threads is None else (threads or os.cpu_count() or 1)
    if threads == 1:
        done = [_kicked_job(cfg, *j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(lambda j: _kicked_job(cfg, *j), jobs))
    by_job = dict(zip(jobs, done))

    result = RunOutput(cfg, [])
    summary_rows = []
    for lam, dim in zip(cfg.lambdas, cfg.dims):
        for policy in cfg.policy:
            times, s2, avg, mean_n, drift = by_job[(lam, dim, policy, cfg.dt)]
            if cfg.dt_halving:
                _, _, fine, _, _ = by_job[(lam, dim, policy, cfg.dt / 2)]
                herr, verr = abs(avg.mean - fine.mean), abs(avg.variance - fine.variance)
            else:
                herr = verr = math.nan
            summary = KickedSummary(lam, policy, dim, cfg.dt * lam, avg.mean, avg.variance,
                                    avg.mean_stderr, avg.variance_stderr, herr, verr,
                                    mean_n, drift, times, s2)
            result.kicked.append(summary)
            nan = _fmt(math.nan)
            rows = ((_fmt(t), _fmt(v), nan, nan) for t, v in zip(times, s2))
            name = f"{cfg.preset}_lambda{lam!r}_{policy_slug(policy)}.csv"
            result.files.append(_write_csv(out / name, CSV_HEADER, rows))
            summary_rows.append((_fmt(lam), policy.label, str(dim), _fmt(summary.dt),
                                 _fmt(summary.mean), _fmt(summary.variance),
                                 _fmt(summary.mean_stderr), _fmt(summary.variance_stderr),
                                 _fmt(herr), _fmt(verr), _fmt(mean_n), _fmt(drift)))
    result.files.append(_write_csv(out / f"{cfg.preset}_summary.csv", SUMMARY_HEADER,
                                   summary_rows))
    return result


# ---------------------------------------------------------------------------
# entry points

def run_config(cfg: ExperimentConfig, out_dir=None, threads: Optional[int] = None) -> RunOutput:
    """Run ``cfg`` writing CSVs and a manifest into ``out_dir`` (default ``cfg.output_path``).

    ``threads=None`` honours ``UNRAVEL_THREADS``; ``0`` means one per CPU.
    Output bytes do not depend on the thread count.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    if threads == 0:
        threads = os.cpu_count() or 1
    result = (_run_kicked if cfg.kicked else _run_ensembles)(cfg, out, threads)
    manifest = out / f"{cfg.preset}_manifest.cfg"
    generated = {
        "run_version": __version__,
        "run_python": platform.python_version(),
        "run_numpy": np.__version__,
        "run_threads": str(threads if threads is not None else default_threads()),
        "run_files": ", ".join(p.name for p in result.files),
    }
    manifest.write_text(format_config(cfg) + "".join(f"{k} = {v}\n" for k, v in generated.items()))
    result.files.append(manifest)
    return result


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unravel", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", required=True, type=Path, help="key = value experiment file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--n-traj", type=int, help="override the number of trajectories")
    p.add_argument("--out", help="output directory (overrides output_path)")
    p.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU "
                   "(default: $UNRAVEL_THREADS or 1)")
    p.add_argument("--dt", type=float, help="override the time step")
    p.add_argument("--paper-scale", action="store_true",
                   help="use full-size preset defaults instead of desk scale")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"unravel: cannot read config: {exc}", file=sys.stderr)
        return 2
    overrides = {"seed": args.seed, "n_traj": args.n_traj, "dt": args.dt, "output_path": args.out}
    try:
        cfg = parse_config(text, overrides={k: v for k, v in overrides.items() if v is not None},
                           paper_scale=args.paper_scale)
    except UnravelError as exc:
        print(f"unravel: {args.config}: {exc}", file=sys.stderr)
        return 2
    if args.threads is not None and args.threads < 0:
        print("unravel: --threads must be >= 0", file=sys.stderr)
        return 2
    try:
        result = run_config(cfg, threads=args.threads)
    except (UnravelError, ValueError) as exc:
        print(f"unravel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in result.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
