"""Deterministic Lindblad master-equation integrator used as a reference.

    drho/dt = -i [H, rho] + sum_j (L_j rho L_j^+ - 1/2 {L_j^+ L_j, rho})

Integration is classical fixed-step RK4 on dense matrices.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError, InstabilityError
from .sde import _as_hamiltonian_fn, _grid

TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def _operators(channels) -> list[np.ndarray]:
    return [np.asarray(getattr(ch, "op", ch), dtype=complex) for ch in channels]


def density_matrix(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def lindblad_rhs(rho, H, channels) -> np.ndarray:
    """Right-hand side of the master equation.

    ``channels`` may hold :class:`~unravel.sde.LindbladChannel` objects or
    bare operator matrices.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    ops = _operators(channels)
    if rho.shape != (dim, dim) or any(op.shape != (dim, dim) for op in ops) or (
            H is not None and np.shape(H) != (dim, dim)):
        raise DimensionError("density matrix, Hamiltonian and channels must share one dimension")
    out = np.zeros_like(rho) if H is None else -1j * (H @ rho - rho @ H)
    for L in ops:
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def check_density(rho, t: Optional[float] = None) -> None:
    """Raise :class:`InstabilityError` if ``rho`` is not a valid density matrix."""
    where = "" if t is None else f" at t={t:.6g}"
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise InstabilityError(f"trace drifted to {tr:.12g}{where}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise InstabilityError(f"hermiticity violated by {herm:.3g}{where}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -POSITIVITY_TOL:
        raise InstabilityError(f"negative eigenvalue {lo:.3g}{where}")


def evolve(rho0, t_final: float, H_of_t, channels, dt: float,
           output_stride: Optional[float] = None, check: bool = True):
    """RK4-integrate ``rho0``; returns ``(times, rhos)`` sampled every ``output_stride``.

    ``rho0`` may be a pure state vector.  Each stage evaluates the
    Hamiltonian at its own time.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = density_matrix(rho)
    h_fn = _as_hamiltonian_fn(H_of_t)
    ops = _operators(channels)
    n_steps, k_out = _grid(t_final, dt, output_stride)
    times = dt * k_out * np.arange(n_steps // k_out + 1)
    out = np.empty((len(times), *rho.shape), dtype=complex)
    out[0] = rho
    if check:
        check_density(rho, 0.0)
    for s in range(n_steps):
        t = s * dt
        k1 = lindblad_rhs(rho, h_fn(t), ops)
        h_mid = h_fn(t + 0.5 * dt)
        k2 = lindblad_rhs(rho + 0.5 * dt * k1, h_mid, ops)
        k3 = lindblad_rhs(rho + 0.5 * dt * k2, h_mid, ops)
        k4 = lindblad_rhs(rho + dt * k3, h_fn(t + dt), ops)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (s + 1) % k_out == 0:
            i = (s + 1) // k_out
            if check:
                check_density(rho, times[i])
            out[i] = rho
    return times, out


def trace_distance(rho1, rho2) -> float:
    """Half the sum of singular values of ``rho1 - rho2``."""
    rho1 = np.asarray(rho1)
    rho2 = np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise DimensionError(f"shapes differ: {rho1.shape} vs {rho2.shape}")
    return float(0.5 * np.sum(np.linalg.svd(rho1 - rho2, compute_uv=False)))


def halving_error(rho0, t_final: float, H_of_t, channels, dt: float) -> float:
    """Trace distance between final states integrated with ``dt`` and ``dt / 2``."""
    _, coarse = evolve(rho0, t_final, H_of_t, channels, dt, output_stride=t_final or dt)
    _, fine = evolve(rho0, t_final, H_of_t, channels, dt / 2, output_stride=t_final or dt / 2)
    return trace_distance(coarse[-1], fine[-1])
