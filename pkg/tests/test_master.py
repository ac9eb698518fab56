import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import matrices, states
from unravel import hilbert as h, master, sde
from unravel.errors import DimensionError, InstabilityError

SIGMA_MINUS = h.annihilation(2)
EXCITED = master.density_matrix(h.fock_state(2, 1))
GROUND = master.density_matrix(h.fock_state(2, 0))


def test_rhs_two_level_decay():
    d = master.lindblad_rhs(EXCITED, None, [SIGMA_MINUS])
    assert d[1, 1] == pytest.approx(-1)
    assert d[0, 0] == pytest.approx(1)


def test_rhs_trivial_cases():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = m @ m.conj().T
    rho /= np.trace(rho)
    assert np.max(np.abs(master.lindblad_rhs(rho, None, []))) == 0
    assert np.max(np.abs(master.lindblad_rhs(GROUND, None, [SIGMA_MINUS]))) == 0


def test_rhs_accepts_channel_objects():
    rho = master.density_matrix(h.superposition(h.fock_state(4, 0), h.fock_state(4, 3)))
    L = 0.7 * h.annihilation(4)
    np.testing.assert_array_equal(master.lindblad_rhs(rho, None, [L]),
                                  master.lindblad_rhs(rho, None, [sde.LindbladChannel(L)]))


@given(st.data())
def test_rhs_traceless_hermitian(data):
    dim = data.draw(st.integers(2, 6))
    psi = data.draw(states(dim=dim))
    m = data.draw(matrices(dim))
    L = data.draw(matrices(dim))
    rho = master.density_matrix(psi)
    d = master.lindblad_rhs(rho, m + m.conj().T, [L])
    assert abs(np.trace(d)) < 1e-12
    assert np.max(np.abs(d - d.conj().T)) < 1e-12


def test_rhs_dimension_mismatch():
    with pytest.raises(DimensionError):
        master.lindblad_rhs(EXCITED, None, [h.annihilation(3)])


def test_evolve_two_level_analytic():
    times, rhos = master.evolve(h.fock_state(2, 1), 1.0, None, [SIGMA_MINUS], 1e-3,
                                output_stride=0.25)
    for t, rho in zip(times, rhos):
        assert rho[1, 1].real == pytest.approx(oracles.two_level_excited_population(t), abs=1e-8)
        assert abs(np.trace(rho) - 1) < 1e-10


def test_evolve_damped_coherent_analytic():
    dim, alpha, kappa = 40, 2.0 - 1.0j, 1.0
    a = h.annihilation(dim)
    times, rhos = master.evolve(h.coherent_state(dim, alpha), 1.0, None, [math.sqrt(kappa) * a],
                                1e-3, output_stride=0.5)
    for t, rho in zip(times, rhos):
        assert abs(np.trace(a @ rho) - alpha * math.exp(-kappa * t / 2)) < 1e-8
        assert abs(np.trace(rho @ rho).real - 1) < 1e-8


def test_evolve_closed_system():
    dim = 6
    H = h.number(dim)
    psi0 = h.normalize(np.arange(1, dim + 1) * (1 + 0.5j))
    times, rhos = master.evolve(psi0, 1.3, H, [], 1e-3, output_stride=1.3)
    u = np.diag(np.exp(-1j * np.arange(dim) * times[-1]))
    exact = u @ master.density_matrix(psi0) @ u.conj().T
    assert master.trace_distance(rhos[-1], exact) < 1e-8


def test_halving_error_small():
    err = master.halving_error(h.fock_state(2, 1), 1.0, None, [SIGMA_MINUS], 1e-3)
    assert err < 1e-8


def test_instability_on_huge_step():
    with pytest.raises(InstabilityError):
        master.evolve(h.fock_state(2, 1), 3.0, None, [SIGMA_MINUS], 3.0)


def test_check_density_flags():
    master.check_density(EXCITED)
    with pytest.raises(InstabilityError):
        master.check_density(2 * EXCITED)
    with pytest.raises(InstabilityError):
        master.check_density(np.array([[0.5, 0.1j], [0.1j, 0.5]]))
    with pytest.raises(InstabilityError):
        master.check_density(np.diag([1.1, -0.1]).astype(complex))


def test_trace_distance_examples():
    assert master.trace_distance(EXCITED, EXCITED) == 0
    assert master.trace_distance(EXCITED, GROUND) == pytest.approx(1)
    assert master.trace_distance(EXCITED, 0.5 * np.eye(2)) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        master.trace_distance(EXCITED, np.eye(3) / 3)


@given(st.integers(1, 2), st.integers(3, 15), st.integers(0, 2 ** 32 - 1))
def test_unitary_transform_invariance(n_ch, dim, seed):
    rng = np.random.default_rng(seed)
    ops = [0.5 * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(dim)
           for _ in range(n_ch)]
    chans = [sde.LindbladChannel(op) for op in ops]
    q, r = np.linalg.qr(rng.normal(size=(n_ch, n_ch)) + 1j * rng.normal(size=(n_ch, n_ch)))
    u = q * (np.diag(r) / np.abs(np.diag(r)))
    lambdas = rng.normal(size=n_ch) + 1j * rng.normal(size=n_ch)
    new, shift = sde.transform_channels(chans, u, lambdas)
    H = h.number(dim) * 0.3
    psi0 = h.normalize(rng.normal(size=dim) + 1j * rng.normal(size=dim))
    _, ref = master.evolve(psi0, 0.5, H, chans, 5e-3, output_stride=0.5)
    _, alt = master.evolve(psi0, 0.5, H + shift, new, 5e-3, output_stride=0.5)
    assert master.trace_distance(ref[-1], alt[-1]) < 1e-8
