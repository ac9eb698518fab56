"""Physical models and localization observables.

Covers the kicked anharmonic oscillator with its classical scaling, the
extraction of squeezing parameters from a pure state, and closed-form
predictions for localization rates used as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import hilbert
from .errors import DomainError
from .hilbert import annihilation, covariance, expectation, is_hermitian, msd
from .noise import check_correlation
from .policies import CorrelationPolicy, CovariancePhase, Fixed, SqueezedPhase

DEFAULT_FLOOR = 1e-10


# ---------------------------------------------------------------------------
# kicked anharmonic oscillator

@dataclass(frozen=True)
class KickedOscillatorParams:
    """Rectangular drive pulses of height ``beta0`` and length ``tau1``
    separated by ``tau2``, Kerr strength ``chi`` and damping rate ``kappa``."""

    beta0: float = 2.0
    tau1: float = 0.98
    tau2: float = 1.0
    chi: float = 1.0
    kappa: float = 0.5
    lambda_scale: float = 1.0

    def __post_init__(self):
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise DomainError("pulse length and separation must be positive")
        if self.kappa < 0:
            raise DomainError("kappa must be non-negative")
        if self.lambda_scale < 1:
            raise DomainError("lambda_scale must be >= 1")

    @property
    def period(self) -> float:
        return self.tau1 + self.tau2


def drive_amplitude(params: KickedOscillatorParams, t: float) -> float:
    period = params.period
    phase = math.fmod(t, period)
    if phase < 0:
        phase += period
    # snap grid times that land a rounding error short of a period boundary
    eps = 1e-9 * period
    if period - phase < eps:
        phase = 0.0
    return params.beta0 if phase < params.tau1 - eps else 0.0


def kicked_hamiltonian(params: KickedOscillatorParams, t: float, dim: int) -> np.ndarray:
    """``i beta(t) (a^+ - a) + chi/2 a^+2 a^2`` on a basis of size ``dim``."""
    a = annihilation(dim)
    ad = a.conj().T
    kerr = 0.5 * params.chi * (ad @ ad @ a @ a)
    beta = drive_amplitude(params, t)
    if beta == 0.0:
        return kerr
    return kerr + 1j * beta * (ad - a)


class KickedOscillator:
    """Cached time-dependent Hamiltonian of the kicked oscillator.

    Instances are callables ``t -> H`` suitable for the trajectory and
    master-equation integrators; only two matrices are ever built.
    """

    def __init__(self, params: KickedOscillatorParams, dim: int):
        self.params = params
        self.dim = dim
        self._off = kicked_hamiltonian(replace(params, beta0=0.0), 0.0, dim)
        self._on = kicked_hamiltonian(params, 0.0, dim)
        self._off.setflags(write=False)
        self._on.setflags(write=False)

    def __call__(self, t: float) -> np.ndarray:
        return self._on if drive_amplitude(self.params, t) != 0.0 else self._off

    def channel_operator(self) -> np.ndarray:
        return math.sqrt(self.params.kappa) * annihilation(self.dim)


def apply_scaling(params: KickedOscillatorParams, lam: float) -> KickedOscillatorParams:
    """Rescale toward the classical limit: times times ``lam``, ``kappa / lam``,
    ``chi / lam**3``, drive height unchanged."""
    if lam < 1:
        raise DomainError(f"scaling parameter must be >= 1, got {lam}")
    return replace(
        params,
        tau1=params.tau1 * lam,
        tau2=params.tau2 * lam,
        kappa=params.kappa / lam,
        chi=params.chi / lam ** 3,
        lambda_scale=params.lambda_scale * lam,
    )


# ---------------------------------------------------------------------------
# squeezing

def squeezing_gamma(psi, floor: float = DEFAULT_FLOOR):
    """``sigma^2(a) / sigma(a^+, a)^*``, or 0 where ``|sigma(a^+, a)| < floor``."""
    a = annihilation(np.shape(psi)[-1])
    s2 = msd(a, psi)
    cov = covariance(a.conj().T, a, psi)
    small = np.abs(cov) < floor
    return np.where(small, 0j, s2 / np.where(small, 1.0, np.conj(cov)))


def squeezing_extract(psi, floor: float = DEFAULT_FLOOR):
    """Squeezing parameter, displacement and fit residual of ``psi``.

    ``gamma = sigma^2(a) / sigma(a^+, a)^*`` (zero when the covariance is
    below ``floor``) and ``alpha = <a> - gamma <a^+>``.  A small residual
    ``||(a - gamma a^+ - alpha) psi||`` certifies that ``psi`` is squeezed;
    callers must check it.  Works row-wise on a batch of states.
    """
    psi = np.asarray(psi, dtype=complex)
    a = annihilation(psi.shape[-1])
    gamma = squeezing_gamma(psi, floor)
    mean_a = expectation(a, psi)
    alpha = mean_a - gamma * np.conj(mean_a)
    residual = hilbert.squeeze_residual(psi, gamma, alpha)
    if psi.ndim == 1:
        return complex(gamma), complex(alpha), float(residual)
    return gamma, alpha, residual


def _policy_c(policy: CorrelationPolicy, gamma: complex) -> complex:
    if isinstance(policy, Fixed):
        return complex(policy.c)
    if isinstance(policy, (SqueezedPhase, CovariancePhase)):
        # both phases coincide on squeezed states
        if abs(gamma) == 0 or policy.r == 0:
            return 0j
        return policy.r * np.conj(gamma) / abs(gamma)
    raise TypeError(f"unknown policy {policy!r}")


def squeezing_ode_oracle(gamma0: complex, kappa: float, policy: CorrelationPolicy,
                         t_grid, max_step: float = 1e-3) -> np.ndarray:
    """RK4 solution of ``d gamma / dt = -kappa gamma (1 + c gamma)`` on ``t_grid``.

    ``c`` is constant for :class:`Fixed` and ``r gamma^*/|gamma|`` for the
    adaptive policies.  ``t_grid`` must be non-decreasing and start at the
    time where ``gamma = gamma0``.
    """
    if abs(gamma0) >= 1:
        raise DomainError(f"|gamma0| must be < 1, got {abs(gamma0)}")
    t_grid = np.asarray(t_grid, dtype=float)

    def rhs(g):
        return -kappa * g * (1 + _policy_c(policy, g) * g)

    out = np.empty(len(t_grid), dtype=complex)
    g = complex(gamma0)
    out[0] = g
    for i in range(1, len(t_grid)):
        span = t_grid[i] - t_grid[i - 1]
        n = max(1, int(math.ceil(span / max_step)))
        h = span / n
        for _ in range(n):
            k1 = rhs(g)
            k2 = rhs(g + 0.5 * h * k1)
            k3 = rhs(g + 0.5 * h * k2)
            k4 = rhs(g + h * k3)
            g = g + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i] = g
    return out


# ---------------------------------------------------------------------------
# localization rates

def hermitian_rate_prediction(c: complex, psi, L) -> float:
    """Instantaneous ensemble drift ``-2 (1 + Re c) sigma^2(L)^2`` for hermitian ``L``."""
    if not is_hermitian(L):
        raise DomainError("hermitian_rate_prediction requires a hermitian operator")
    c = check_correlation(c)
    s2 = float(msd(L, psi))
    return float(-2.0 * (1.0 + c.real) * s2 ** 2)


def annihilation_drift_bracket(psi, c: complex) -> float:
    """Bracket of the deterministic part of ``d sigma^2(a)``, per unit ``kappa``:
    ``s2 + s2^2 + |s|^2 + 2 s2 Re(c s)`` with ``s2 = sigma^2(a)``, ``s = sigma(a^+, a)``."""
    a = annihilation(np.shape(psi)[-1])
    s2 = float(msd(a, psi))
    s = complex(covariance(a.conj().T, a, psi))
    return s2 + s2 ** 2 + abs(s) ** 2 + 2 * s2 * (complex(c) * s).real


def annihilation_drift_decomposition(psi, c: complex) -> tuple[float, float, float]:
    """Split the drift bracket of ``sigma^2(a)`` into three non-negative terms.

    Returns ``(s2, (s2 - |s|)^2, 2 s2 |s| (1 + Re(c s / |s|)))``; their sum
    equals :func:`annihilation_drift_bracket` and the last term is
    non-negative whenever ``|c| <= 1``.
    """
    c = complex(check_correlation(c))
    a = annihilation(np.shape(psi)[-1])
    s2 = float(msd(a, psi))
    s = complex(covariance(a.conj().T, a, psi))
    term3 = 0.0
    if abs(s) > 0:
        term3 = 2 * s2 * abs(s) * (1 + (c * s / abs(s)).real)
    return s2, (s2 - abs(s)) ** 2, term3
