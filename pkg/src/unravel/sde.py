"""Ito stochastic Schroedinger equation for continuous unravelings.

The state increment is

    dpsi = v dt + sum_k (L_k - <L_k>) psi dzeta_k,
    v = -i H psi - 1/2 sum_k (L_k^+ L_k + <L_k^+><L_k> - 2 <L_k^+> L_k) psi,

where each channel's complex noise has ``E|dzeta|^2 = dt`` and
``E[dzeta^2] = c dt``.  The correlation factor ``c`` is chosen per channel
and per step by a policy (see :mod:`unravel.policies`).  Integration is
Euler-Maruyama with renormalization after every step.

All integrators work on a batch of independent trajectories at once, one
row per trajectory, each row drawing its noise from its own generator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import hilbert
from .errors import DimensionError, DomainError, InstabilityError, TruncationWarning
from .models import DEFAULT_FLOOR, squeezing_gamma
from .noise import _check_unitary, increments_from_normals, mix_increments
from .policies import QSD, CorrelationPolicy, CovariancePhase, Fixed, SqueezedPhase

Observable = Callable[[np.ndarray], np.ndarray]

LEAKAGE_TOL = 1e-6
SCHEMES = ("euler", "split")
_NOISE_CHUNK = 256


@dataclass(frozen=True, eq=False)
class LindbladChannel:
    """Environment operator (including any sqrt(rate) prefactor) and its noise policy."""

    op: np.ndarray
    policy: CorrelationPolicy = QSD
    _ops: tuple = field(init=False, repr=False)

    def __post_init__(self):
        op = np.array(self.op, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"Lindblad operator must be square, got {op.shape}")
        op.setflags(write=False)
        object.__setattr__(self, "op", op)
        # transposes are what a row-batch of states multiplies by
        object.__setattr__(self, "_ops", (op.T.copy(), (op.conj().T @ op).T.copy()))

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def with_policy(self, policy: CorrelationPolicy) -> "LindbladChannel":
        return LindbladChannel(self.op, policy)


@dataclass(frozen=True)
class SdeConfig:
    """Integrator settings.

    ``noise_mixing`` is an optional unitary ``beta``: channel noises are then
    ``dzeta_k = sum_i beta_ik xi_i`` where ``xi_i`` carries channel ``i``'s
    policy correlation.  Adaptive policies below ``adaptive_floor`` fall back
    to ``c = 0``.

    ``scheme="euler"`` treats the Hamiltonian with the explicit drift term.
    ``scheme="split"`` applies the exact propagator ``exp(-i H dt)`` after
    the dissipative and stochastic increment instead; explicit Euler is
    unstable for stiff spectra such as a Kerr term on a large basis.
    """

    dt: float
    renormalize_every_step: bool = True
    adaptive_floor: float = DEFAULT_FLOOR
    noise_mixing: Optional[np.ndarray] = None
    scheme: str = "euler"

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.adaptive_floor > 0:
            raise DomainError("adaptive_floor must be positive")
        if self.noise_mixing is not None:
            object.__setattr__(self, "noise_mixing", _check_unitary(self.noise_mixing, "noise_mixing"))


def _as_hamiltonian_fn(H) -> Callable[[float], Optional[np.ndarray]]:
    if H is None or callable(H):
        return H if H is not None else (lambda t: None)
    H = np.asarray(H, dtype=complex)
    return lambda t: H


def _check_dims(dim: int, H, channels: Sequence[LindbladChannel]) -> None:
    for ch in channels:
        if ch.dim != dim:
            raise DimensionError(f"channel of dimension {ch.dim} on a state of dimension {dim}")
    if H is not None and np.shape(H) != (dim, dim):
        raise DimensionError(f"Hamiltonian of shape {np.shape(H)} on a state of dimension {dim}")


def _rows(psi) -> tuple[np.ndarray, bool]:
    psi = np.asarray(psi, dtype=complex)
    return (psi[None, :], True) if psi.ndim == 1 else (psi, False)


# ---------------------------------------------------------------------------
# drift, diffusion, policies

def drift(psi, H, channels: Sequence[LindbladChannel]) -> np.ndarray:
    """Drift vector ``v`` of the increment equation (hbar = 1)."""
    rows, single = _rows(psi)
    _check_dims(rows.shape[-1], H, channels)
    v = np.zeros_like(rows) if H is None else -1j * (rows @ np.asarray(H).T)
    for ch in channels:
        op_t, ldl_t = ch._ops
        l_psi = rows @ op_t
        ell = np.sum(rows.conj() * l_psi, axis=-1)[:, None]
        v -= 0.5 * (rows @ ldl_t + np.abs(ell) ** 2 * rows - 2 * ell.conj() * l_psi)
    return v[0] if single else v


def diffusion_vector(psi, channel: LindbladChannel) -> np.ndarray:
    """Fluctuation vector ``(L - <L>) psi`` multiplying the channel noise."""
    rows, single = _rows(psi)
    _check_dims(rows.shape[-1], None, [channel])
    l_psi = rows @ channel._ops[0]
    ell = np.sum(rows.conj() * l_psi, axis=-1)[:, None]
    u = l_psi - ell * rows
    return u[0] if single else u


def _phase_or_zero(z: np.ndarray, r: float, floor: float) -> np.ndarray:
    mod = np.abs(z)
    small = mod < floor
    return np.where(small, 0j, r * np.conj(z) / np.where(small, 1.0, mod))


def evaluate_policy(policy: CorrelationPolicy, psi, channel: LindbladChannel,
                    floor: float = DEFAULT_FLOOR):
    """Correlation factor the policy prescribes for ``psi`` on ``channel``.

    Returns a complex number, or one per row for a batch of states.
    """
    rows, single = _rows(psi)
    if isinstance(policy, Fixed):
        c = np.full(rows.shape[0], complex(policy.c))
    elif policy.r == 0:
        c = np.zeros(rows.shape[0], dtype=complex)
    elif isinstance(policy, CovariancePhase):
        l_psi = rows @ channel._ops[0]
        ell = np.sum(rows.conj() * l_psi, axis=-1)
        cov = np.sum(rows.conj() * (l_psi @ channel._ops[0]), axis=-1) - ell ** 2
        c = _phase_or_zero(cov, policy.r, floor)
    elif isinstance(policy, SqueezedPhase):
        gamma = squeezing_gamma(rows, floor)
        c = _phase_or_zero(gamma, policy.r, floor)
    else:
        raise TypeError(f"unknown policy {policy!r}")
    return complex(c[0]) if single else c


# ---------------------------------------------------------------------------
# stepping

class _Propagators:
    """Cache of ``exp(-i H dt)`` transposes for piecewise-constant Hamiltonians."""

    def __init__(self, dt: float):
        self.dt = dt
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __call__(self, H: np.ndarray) -> np.ndarray:
        hit = self._cache.get(id(H))
        if hit is not None and hit[0] is H:
            return hit[1]
        if not hilbert.is_hermitian(H, 1e-10):
            raise DomainError("split scheme requires a hermitian Hamiltonian")
        w, v = np.linalg.eigh(H)
        u_t = ((v * np.exp(-1j * w * self.dt)) @ v.conj().T).T.copy()
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[id(H)] = (H, u_t)
        return u_t


def _increment(rows, H, channels, config: SdeConfig, normals, props=None) -> np.ndarray:
    """Un-normalized ``psi + dpsi`` for a batch; ``normals`` has shape (B, J, 2)."""
    dt = config.dt
    split = config.scheme == "split" and H is not None
    new = rows.copy() if H is None or split else rows - 1j * dt * (rows @ H.T)
    us = []
    cs = np.empty((rows.shape[0], len(channels)), dtype=complex)
    for j, ch in enumerate(channels):
        op_t, ldl_t = ch._ops
        l_psi = rows @ op_t
        ell = np.sum(rows.conj() * l_psi, axis=-1)[:, None]
        new -= 0.5 * dt * (rows @ ldl_t + np.abs(ell) ** 2 * rows - 2 * ell.conj() * l_psi)
        us.append(l_psi - ell * rows)
        cs[:, j] = evaluate_policy(ch.policy, rows, ch, config.adaptive_floor)
    if channels:
        dzeta = increments_from_normals(cs, dt, normals)
        if config.noise_mixing is not None:
            dzeta = mix_increments(dzeta, config.noise_mixing)
        for j, u in enumerate(us):
            new += u * dzeta[:, j, None]
    if split:
        new = new @ (props or _Propagators(dt))(H)
    return new


def _finish(new, config: SdeConfig, t: float) -> np.ndarray:
    norms = np.linalg.norm(new, axis=-1)
    bound = 10 * math.sqrt(config.dt)
    bad = np.abs(norms - 1) > bound
    if np.any(bad):
        worst = float(norms[bad][np.argmax(np.abs(norms[bad] - 1))])
        err = InstabilityError(
            f"norm {worst:.6g} left [1 - {bound:.3g}, 1 + {bound:.3g}] at t={t:.6g}; "
            f"use a smaller time step than dt={config.dt}")
        err.rows = [int(i) for i in np.flatnonzero(bad)]
        err.time = t
        raise err
    if config.renormalize_every_step:
        new = new / norms[:, None]
    return new


def step(psi, t: float, H_of_t, channels: Sequence[LindbladChannel],
         config: SdeConfig, rng: np.random.Generator) -> np.ndarray:
    """Advance one trajectory by ``config.dt``.

    Draws ``2 * len(channels)`` standard normals from ``rng``; policies are
    evaluated on the pre-step state.
    """
    rows, _ = _rows(psi)
    H = _as_hamiltonian_fn(H_of_t)(t)
    _check_dims(rows.shape[-1], H, channels)
    normals = rng.standard_normal((len(channels), 2))[None]
    return _finish(_increment(rows, H, channels, config, normals), config, t)[0]


def transform_channels(channels: Sequence[LindbladChannel], u, lambdas):
    """Re-express the channel set through ``L_j = sum_k u_jk Lt_k - lambda_j``.

    Returns ``(new_channels, h_shift)`` with ``Lt_k = sum_j u_jk^* (L_j + lambda_j)``.
    The constant shifts change the master equation unless the Hamiltonian
    is corrected, so ``H + h_shift`` must be used with the new channels,
    ``h_shift = -i/2 sum_j (lambda_j^* L_j - lambda_j L_j^+)``.  Policies are
    carried over by position.
    """
    u = _check_unitary(u, "u")
    lambdas = np.asarray(lambdas, dtype=complex)
    if u.shape[0] != len(channels) or lambdas.shape != (len(channels),):
        raise DimensionError("u and lambdas must match the number of channels")
    dim = channels[0].dim
    eye = np.eye(dim, dtype=complex)
    shifted = [ch.op + lam * eye for ch, lam in zip(channels, lambdas)]
    new_ops = [sum(np.conj(u[j, k]) * shifted[j] for j in range(len(channels)))
               for k in range(len(channels))]
    h_shift = np.zeros((dim, dim), dtype=complex)
    for ch, lam in zip(channels, lambdas):
        h_shift += -0.5j * (np.conj(lam) * ch.op - lam * ch.op.conj().T)
    new = [LindbladChannel(op, ch.policy) for op, ch in zip(new_ops, channels)]
    return new, h_shift


# ---------------------------------------------------------------------------
# trajectories

def standard_observables(op: np.ndarray, prefix: str = "L") -> dict[str, Observable]:
    """``<L>``, ``sigma^2(L)``, ``sigma(L^+, L)`` and the state norm."""
    op = np.asarray(op, dtype=complex)
    return {
        f"expect_{prefix}": lambda s: hilbert.expectation(op, s),
        f"sigma2_{prefix}": lambda s: hilbert.msd(op, s),
        f"cov_{prefix}dag_{prefix}": lambda s: hilbert.covariance(op.conj().T, op, s),
        "norm": lambda s: np.linalg.norm(s, axis=-1),
    }


@dataclass
class BatchResult:
    """Recorded output of a batch of trajectories.

    ``values[name]`` has shape ``(n_traj, n_times)``; ``states`` (when kept)
    has shape ``(n_traj, n_times, dim)``.
    """

    times: np.ndarray
    values: dict[str, np.ndarray]
    final: np.ndarray
    max_leakage: np.ndarray
    states: Optional[np.ndarray] = None


def _grid(t_final: float, dt: float, output_stride: Optional[float]) -> tuple[int, int]:
    n_steps = int(round(t_final / dt))
    if t_final < 0 or abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise DomainError(f"t_final={t_final} is not a non-negative multiple of dt={dt}")
    stride = output_stride if output_stride is not None else dt
    k = int(round(stride / dt))
    if k < 1 or abs(k * dt - stride) > 1e-9 * max(1.0, stride):
        raise DomainError(f"output stride {stride} is not a positive multiple of dt={dt}")
    return n_steps, k


def run_batch(psi0, t_final: float, H_of_t, channels: Sequence[LindbladChannel],
              config: SdeConfig, rngs: Sequence[np.random.Generator],
              observables: Mapping[str, Observable], output_stride: Optional[float] = None,
              keep_states: bool = False, monitor_truncation: bool = True,
              t0: float = 0.0) -> BatchResult:
    """Integrate ``len(rngs)`` trajectories from ``psi0`` (one state or one per row).

    Observables are recorded at ``t0`` and every ``output_stride`` up to
    ``t_final``.  Population of the two highest basis states is tracked at
    recording times and a :class:`TruncationWarning` is issued when it
    exceeds ``LEAKAGE_TOL`` (bases of four or fewer states are exempt).
    """
    n_traj = len(rngs)
    psi0 = np.asarray(psi0, dtype=complex)
    rows = np.broadcast_to(psi0, (n_traj, psi0.shape[-1])).copy()
    dim = rows.shape[1]
    h_fn = _as_hamiltonian_fn(H_of_t)
    _check_dims(dim, h_fn(t0), channels)
    n_steps, k_out = _grid(t_final, config.dt, output_stride)
    n_out = n_steps // k_out + 1
    n_ch = len(channels)

    times = t0 + config.dt * k_out * np.arange(n_out)
    values = {name: None for name in observables}
    states = np.empty((n_traj, n_out, dim), dtype=complex) if keep_states else None
    leak = np.zeros(n_traj)
    monitor = monitor_truncation and dim > 4

    def record(i):
        for name, fn in observables.items():
            val = np.asarray(fn(rows))
            if values[name] is None:
                values[name] = np.empty((n_traj, n_out), dtype=val.dtype)
            values[name][:, i] = val
        if keep_states:
            states[:, i] = rows
        if monitor:
            np.maximum(leak, hilbert.top_population(rows), out=leak)

    record(0)
    props = _Propagators(config.dt)
    buf = None
    for s in range(n_steps):
        j = s % _NOISE_CHUNK
        if j == 0 and n_ch:
            m = min(_NOISE_CHUNK, n_steps - s)
            buf = np.stack([g.standard_normal((m, n_ch, 2)) for g in rngs])
        t = t0 + s * config.dt
        H = h_fn(t)
        normals = buf[:, j] if n_ch else None
        rows = _finish(_increment(rows, H, channels, config, normals, props), config, t)
        if (s + 1) % k_out == 0:
            record((s + 1) // k_out)

    if monitor and np.any(leak > LEAKAGE_TOL):
        warnings.warn(
            f"population {leak.max():.3g} reached the top two levels of the dim={dim} basis; "
            "results may be truncation-limited", TruncationWarning, stacklevel=2)
    values = {name: (v if v is not None else np.empty((n_traj, n_out))) for name, v in values.items()}
    return BatchResult(times, values, rows, leak, states)


@dataclass
class TrajectoryResult:
    times: np.ndarray
    values: dict[str, np.ndarray]
    final: np.ndarray
    max_leakage: float


def run_trajectory(psi0, t_final: float, H_of_t, channels: Sequence[LindbladChannel],
                   config: SdeConfig, rng: np.random.Generator,
                   observables: Mapping[str, Observable], output_stride: Optional[float] = None,
                   monitor_truncation: bool = True) -> TrajectoryResult:
    """Single-trajectory convenience wrapper around :func:`run_batch`."""
    res = run_batch(psi0, t_final, H_of_t, channels, config, [rng], observables,
                    output_stride=output_stride, monitor_truncation=monitor_truncation)
    return TrajectoryResult(res.times, {k: v[0] for k, v in res.values.items()},
                            res.final[0], float(res.max_leakage[0]))
