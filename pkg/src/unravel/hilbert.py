"""Truncated Fock-space toolkit: states, ladder operators and moments.

States are plain complex ``numpy`` arrays of shape ``(dim,)``; every moment
function also accepts a batch of states with shape ``(n, dim)`` and then
returns one value per row.  Operators are dense ``(dim, dim)`` complex
arrays.  Hamiltonians are stored with hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, TruncationError

StateVector = np.ndarray
Operator = np.ndarray

#: Largest probability allowed outside the truncated basis.
TRUNCATION_TOL = 1e-8
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class SqueezedParams:
    """Label of the squeezed state annihilated by ``a - gamma a^+ - alpha``."""

    gamma: complex
    alpha: complex = 0.0

    def __post_init__(self):
        if abs(self.gamma) >= 1:
            raise DomainError(f"|gamma| must be < 1, got {abs(self.gamma):.6g}")


# ---------------------------------------------------------------------------
# operators

def _check_dim(dim: int) -> None:
    if int(dim) != dim or dim < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {dim!r}")


def annihilation(dim: int) -> Operator:
    """Truncated annihilation operator, ``a[n-1, n] = sqrt(n)``."""
    _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def creation(dim: int) -> Operator:
    return annihilation(dim).conj().T


def number(dim: int) -> Operator:
    _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity(dim: int) -> Operator:
    _check_dim(dim)
    return np.eye(dim, dtype=complex)


def quadrature(dim: int) -> Operator:
    """Position-like quadrature ``(a + a^+) / sqrt(2)``."""
    a = annihilation(dim)
    return (a + a.conj().T) / np.sqrt(2.0)


def is_hermitian(op: Operator, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) < tol)


# ---------------------------------------------------------------------------
# states

def normalize(psi: StateVector) -> StateVector:
    """Return ``psi`` scaled to unit norm (row-wise for a batch)."""
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DomainError("cannot normalize the zero vector")
    return psi / norm


def fock_state(dim: int, n: int) -> StateVector:
    _check_dim(dim)
    if not 0 <= n < dim:
        raise IndexError(f"Fock index {n} outside basis of dimension {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def _coherent_amplitudes(dim: int, alpha: complex, tol: float = TRUNCATION_TOL) -> np.ndarray:
    """Untruncated-normalized coherent amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)``
    for ``n < dim``, raising if the discarded probability is too large."""
    _check_dim(dim)
    alpha = complex(alpha)
    n = np.arange(dim)
    if alpha == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return amps
    log_mod = (n * math.log(abs(alpha)) - 0.5 * abs(alpha) ** 2
               - 0.5 * np.array([math.lgamma(k + 1) for k in n]))
    amps = np.exp(log_mod) * np.exp(1j * n * np.angle(alpha))
    tail = 1.0 - float(np.sum(np.exp(2 * log_mod)))
    if tail > tol:
        raise TruncationError(
            f"coherent amplitude alpha={alpha} loses probability {tail:.3g} "
            f"outside dim={dim}; increase the dimension")
    return amps


def coherent_state(dim: int, alpha: complex, tol: float = TRUNCATION_TOL) -> StateVector:
    return normalize(_coherent_amplitudes(dim, alpha, tol))


def cat_state(dim: int, alpha: complex, tol: float = TRUNCATION_TOL) -> StateVector:
    """Even cat ``(|alpha> + |-alpha>)`` normalized on the truncated basis.

    Normalizing after the sum accounts for the overlap of the two branches;
    for ``alpha = 0`` this is the vacuum.
    """
    plus = _coherent_amplitudes(dim, alpha, tol)
    # |-alpha> has amplitudes (-1)^n times those of |alpha>; odd terms cancel exactly
    even = plus.copy()
    even[1::2] = 0
    return normalize(2 * even)


def superposition(*states: StateVector) -> StateVector:
    """Equal-weight normalized sum of the given states."""
    return normalize(np.sum(np.asarray(states, dtype=complex), axis=0))


def squeezed_state(dim: int, params: SqueezedParams,
                   tol: float = TRUNCATION_TOL) -> StateVector:
    """Squeezed state built from ``(a - gamma a^+ - alpha)|psi> = 0``.

    Amplitudes follow ``sqrt(n+1) c[n+1] = alpha c[n] + gamma sqrt(n) c[n-1]``
    with ``c[0] = 1``; the state is normalized afterwards.  The truncated
    basis cuts the recurrence, so the residual of the defining relation is
    ``sqrt(dim) |c[dim]|``; it must stay below ``tol``.
    """
    _check_dim(dim)
    gamma, alpha = complex(params.gamma), complex(params.alpha)
    # one extra amplitude to measure what the truncation discards
    c = np.zeros(dim + 1, dtype=complex)
    c[0] = 1.0
    c[1] = alpha
    for n in range(1, dim):
        c[n + 1] = (alpha * c[n] + gamma * math.sqrt(n) * c[n - 1]) / math.sqrt(n + 1)
    psi = normalize(c[:dim])
    residual = squeeze_residual(psi, gamma, alpha)
    if residual > tol:
        raise TruncationError(
            f"squeezed state {params} has residual {residual:.3g} at dim={dim}")
    return psi


def squeeze_residual(psi: StateVector, gamma, alpha) -> np.ndarray:
    """Norm of ``(a - gamma a^+ - alpha)|psi>``; broadcasts over a batch."""
    psi = np.asarray(psi, dtype=complex)
    dim = psi.shape[-1]
    a = annihilation(dim)
    gamma = np.asarray(gamma)[..., None]
    alpha = np.asarray(alpha)[..., None]
    vec = psi @ a.T - gamma * (psi @ a.conj()) - alpha * psi
    return np.linalg.norm(vec, axis=-1)


def top_population(psi: StateVector, levels: int = 2) -> np.ndarray:
    """Probability in the highest ``levels`` basis states (truncation leakage)."""
    psi = np.asarray(psi)
    return np.sum(np.abs(psi[..., -levels:]) ** 2, axis=-1)


# ---------------------------------------------------------------------------
# moments

def _apply(op: Operator, psi: StateVector) -> np.ndarray:
    op = np.asarray(op)
    psi = np.asarray(psi)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[1] != psi.shape[-1]:
        raise DimensionError(
            f"operator of shape {op.shape} cannot act on state of shape {psi.shape}")
    return psi @ op.T


def _braket(bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    return np.sum(bra.conj() * ket, axis=-1)


def expectation(op: Operator, psi: StateVector):
    """``<psi|op|psi>`` as a complex number (array for a batch)."""
    return _braket(np.asarray(psi), _apply(op, psi))


def covariance(A: Operator, B: Operator, psi: StateVector):
    """Quantum covariance ``<A^+ B> - <A^+><B>`` of a pure state."""
    a_psi = _apply(A, psi)
    b_psi = _apply(B, psi)
    psi = np.asarray(psi)
    return _braket(a_psi, b_psi) - np.conj(_braket(psi, a_psi)) * _braket(psi, b_psi)


def msd(op: Operator, psi: StateVector):
    """Quantum mean square deviation ``sigma^2(op)``, returned as a real value."""
    return np.real(covariance(op, op, psi))
