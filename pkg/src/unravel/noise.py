"""Complex noise increments with a prescribed correlation factor.

A continuous unraveling is labelled by the correlation factor ``c`` of its
complex noise, ``E[dzeta^2] = c dt`` with ``E|dzeta|^2 = dt``.  Increments
are realized from two independent standard normals per channel and step.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

UNIT_DISK_TOL = 1e-12
UNITARY_TOL = 1e-10


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator for trajectory ``stream_id`` of a run seeded by ``seed``.

    The same ``(seed, stream_id)`` pair always reproduces the same draws.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(seq))


def check_correlation(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if np.any(np.abs(c) > 1 + UNIT_DISK_TOL):
        raise DomainError(f"correlation factor outside the unit disk: |c| = {np.max(np.abs(c))}")
    return c


def increments_from_normals(c, dt: float, normals: np.ndarray) -> np.ndarray:
    """Map standard normals ``normals[..., 0:2]`` to increments with correlation ``c``.

    ``dzeta = e^{i arg(c)/2} (sqrt((1+|c|)/2) g1 + i sqrt((1-|c|)/2) g2) sqrt(dt)``
    has ``E|dzeta|^2 = dt`` and ``E[dzeta^2] = c dt``.
    """
    c = np.asarray(c, dtype=complex)
    mod = np.minimum(np.abs(c), 1.0)
    phase = np.exp(0.5j * np.angle(c))
    g1 = normals[..., 0]
    g2 = normals[..., 1]
    return phase * (np.sqrt(0.5 * (1 + mod)) * g1 + 1j * np.sqrt(0.5 * (1 - mod)) * g2) * np.sqrt(dt)


def sample_increment(c: complex, dt: float, rng: np.random.Generator, size=None):
    """Draw one increment (or ``size`` of them) for correlation factor ``c``."""
    c = check_correlation(c)
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    shape = (2,) if size is None else tuple(np.atleast_1d(size)) + (2,)
    out = increments_from_normals(c, dt, rng.standard_normal(shape))
    return complex(out) if size is None else out


def correlation_from_alphas(alphas) -> complex:
    """Correlation factor ``sum(alpha^2) / sum(|alpha|^2)`` of a Wiener combination."""
    alphas = np.asarray(alphas, dtype=complex).ravel()
    denom = float(np.sum(np.abs(alphas) ** 2))
    if denom == 0.0:
        raise DomainError("at least one Wiener coefficient must be nonzero")
    return complex(np.sum(alphas ** 2) / denom)


def _check_unitary(u: np.ndarray, name: str) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError(f"{name} must be a square matrix, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > UNITARY_TOL:
        raise DomainError(f"{name} is not unitary (deviation {err:.3g})")
    return u


def correlation_matrix(betas, cs) -> np.ndarray:
    """Correlations ``c_jk = sum_i beta_ij beta_ik c_i`` of mixed channel noises."""
    betas = _check_unitary(betas, "betas")
    cs = check_correlation(cs)
    if cs.shape != (betas.shape[0],):
        raise DomainError(f"expected {betas.shape[0]} correlation factors, got {cs.shape}")
    c = betas.T @ (cs[:, None] * betas)
    return 0.5 * (c + c.T)


def mix_increments(xi: np.ndarray, betas) -> np.ndarray:
    """Combine independent increments ``xi[..., i]`` into ``dzeta_k = sum_i beta_ik xi_i``."""
    return xi @ np.asarray(betas)


def check_unitary_invariance(cs) -> bool:
    """True when every correlation factor vanishes (QSD-type noise)."""
    return bool(np.all(np.abs(np.asarray(cs, dtype=complex)) < 1e-12))
