"""Ensemble execution and statistics over independent trajectories.

Trajectories are split into fixed-size batches by index, so the noise each
trajectory sees and the arithmetic performed on it do not depend on the
number of worker threads.  Partial statistics are merged in index order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, FitError, InstabilityError
from .noise import rng_stream
from .sde import BatchResult, LindbladChannel, Observable, SdeConfig, run_batch

BATCH_SIZE = 64
Z95 = 1.96


@dataclass
class Moments:
    """Mergeable count / mean / sum of squared deviations (Chan et al. update)."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "Moments":
        x = np.asarray(x)
        mean = x.mean(axis=0)
        return cls(x.shape[0], mean, np.sum(np.abs(x - mean) ** 2, axis=0))

    def merge(self, other: "Moments") -> "Moments":
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @property
    def variance(self) -> np.ndarray:
        """Unbiased sample variance (``E|x - mean|^2`` for complex data)."""
        return self.m2 / (self.count - 1) if self.count > 1 else np.zeros_like(self.m2)

    @property
    def ci95(self) -> np.ndarray:
        return Z95 * np.sqrt(self.variance / self.count)


def merge_all(parts: Sequence[Moments]) -> Moments:
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return total


@dataclass
class Experiment:
    """Everything a trajectory needs besides its initial state and noise."""

    channels: Sequence[LindbladChannel]
    config: SdeConfig
    t_final: float
    observables: Mapping[str, Observable]
    output_stride: Optional[float] = None
    H_of_t: object = None
    keep_states: bool = False
    monitor_truncation: bool = True


@dataclass
class EnsembleResult:
    """Per-time ensemble mean, variance and 95% half-width of each observable.

    ``samples[name]`` holds the per-trajectory values, shape
    ``(n_traj, n_times)``; ``states`` is filled only when the experiment
    keeps states.
    """

    times: np.ndarray
    mean: dict[str, np.ndarray]
    variance: dict[str, np.ndarray]
    ci95: dict[str, np.ndarray]
    n_traj: int
    samples: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    states: Optional[np.ndarray] = field(repr=False, default=None)
    max_leakage: float = 0.0


def default_threads() -> int:
    env = os.environ.get("UNRAVEL_THREADS")
    if env:
        n = int(env)
        return n if n > 0 else (os.cpu_count() or 1)
    return 1


def _run_one_batch(psi0, experiment: Experiment, seed: int, start: int, stop: int) -> BatchResult:
    rngs = [rng_stream(seed, i) for i in range(start, stop)]
    try:
        return run_batch(psi0, experiment.t_final, experiment.H_of_t, experiment.channels,
                         experiment.config, rngs, experiment.observables,
                         output_stride=experiment.output_stride,
                         keep_states=experiment.keep_states,
                         monitor_truncation=experiment.monitor_truncation)
    except InstabilityError as exc:
        rows = getattr(exc, "rows", None)
        which = f"trajectory {start + rows[0]}" if rows else f"trajectories {start}..{stop - 1}"
        raise InstabilityError(f"{which}: {exc}") from exc


def run_ensemble(psi0, experiment: Experiment, n_traj: int, seed: int,
                 threads: Optional[int] = None, batch_size: int = BATCH_SIZE) -> EnsembleResult:
    """Run trajectories ``0 .. n_traj-1`` (stream ids) and reduce their observables.

    The result is bit-identical for a given ``(psi0, experiment, n_traj,
    seed, batch_size)`` whatever the thread count.
    """
    if n_traj < 2:
        raise DomainError(f"an ensemble needs at least 2 trajectories, got {n_traj}")
    threads = default_threads() if threads is None else threads
    if threads <= 0:
        threads = os.cpu_count() or 1
    bounds = [(s, min(s + batch_size, n_traj)) for s in range(0, n_traj, batch_size)]

    def job(b):
        return _run_one_batch(psi0, experiment, seed, *b)

    if threads == 1 or len(bounds) == 1:
        parts = [job(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, bounds))

    names = list(experiment.observables)
    mean, var, ci = {}, {}, {}
    samples = {}
    for name in names:
        m = merge_all([Moments.from_samples(p.values[name]) for p in parts])
        mean[name], var[name], ci[name] = m.mean, m.variance, m.ci95
        samples[name] = np.concatenate([p.values[name] for p in parts])
    states = np.concatenate([p.states for p in parts]) if experiment.keep_states else None
    leak = float(max(p.max_leakage.max() for p in parts))
    return EnsembleResult(parts[0].times, mean, var, ci, n_traj, samples, states, leak)


def ensemble_density(states) -> np.ndarray:
    """Mean projector ``M(|psi><psi|)`` over the rows of ``states``."""
    states = np.asarray(states, dtype=complex)
    if states.ndim != 2:
        raise DomainError("expected a (n_states, dim) array of states")
    if states.shape[0] < 2:
        raise DomainError("need at least two states")
    rho = states.T @ states.conj() / states.shape[0]
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    stderr: float
    window: tuple[float, float]


def fit_rate(series: EnsembleResult, observable: str, window: tuple[float, float]) -> RateEstimate:
    """Exponential decay rate of the ensemble mean of ``observable`` in ``window``.

    Least-squares slope of ``log(mean)`` against time; the rate is minus the
    slope and ``stderr`` the usual OLS standard error from the residuals.
    """
    return fit_rate_arrays(series.times, np.real(series.mean[observable]), window)


def fit_rate_arrays(times, values, window: tuple[float, float]) -> RateEstimate:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t0, t1 = window
    eps = 1e-9 * max(1.0, abs(t1))
    sel = (times >= t0 - eps) & (times <= t1 + eps)
    if sel.sum() < 3:
        raise FitError(f"fewer than three samples in window {window}")
    y = values[sel]
    if np.any(y <= 0):
        raise FitError(f"non-positive values in window {window}; localization may be complete")
    x = times[sel]
    ly = np.log(y)
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (ly - ly.mean())) / sxx
    resid = ly - (ly.mean() + slope * (x - xm))
    stderr = math.sqrt(np.sum(resid ** 2) / (len(x) - 2) / sxx)
    return RateEstimate(float(-slope), float(stderr), (float(t0), float(t1)))


@dataclass(frozen=True)
class TimeAverage:
    """Stationary statistics of a single long trajectory."""

    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float
    window_means: np.ndarray
    window_variances: np.ndarray


def time_average(times, values, t_start: float, n_windows: int = 4) -> TimeAverage:
    """Mean and variance over ``t >= t_start`` of one trajectory's record.

    Standard errors come from the spread of ``n_windows`` consecutive
    equal-length windows (batch means); they ignore correlations between
    neighbouring windows.
    """
    times = np.asarray(times)
    values = np.asarray(values, dtype=float)
    sel = values[times >= t_start - 1e-12]
    if len(sel) < 2 * n_windows:
        raise DomainError("not enough samples after t_start for the requested windows")
    chunks = np.array_split(sel, n_windows)
    wm = np.array([c.mean() for c in chunks])
    wv = np.array([c.var() for c in chunks])
    return TimeAverage(float(sel.mean()), float(sel.var()),
                       float(wm.std(ddof=1) / math.sqrt(n_windows)),
                       float(wv.std(ddof=1) / math.sqrt(n_windows)), wm, wv)
