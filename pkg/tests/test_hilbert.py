import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from conftest import matrices, states
from unravel import hilbert as h
from unravel.errors import DimensionError, DomainError, TruncationError


# operators ----------------------------------------------------------------

def test_two_level_ladder():
    np.testing.assert_array_equal(h.annihilation(2), [[0, 1], [0, 0]])


def test_ladder_action_dim3():
    out = h.annihilation(3) @ h.fock_state(3, 2)
    np.testing.assert_allclose(out, math.sqrt(2) * h.fock_state(3, 1))


def test_number_diagonal():
    np.testing.assert_array_equal(np.diag(h.number(5)).real, [0, 1, 2, 3, 4])
    assert np.count_nonzero(h.number(5) - np.diag(np.diag(h.number(5)))) == 0


@pytest.mark.parametrize("dim", [2, 5, 17])
def test_ladder_matches_loop_oracle(dim):
    np.testing.assert_array_equal(h.annihilation(dim), oracles.ladder(dim))
    np.testing.assert_array_equal(h.creation(dim), oracles.ladder(dim).conj().T)


def test_truncated_commutator():
    a = h.annihilation(6)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(6)
    expected[-1, -1] = -5
    np.testing.assert_allclose(comm, expected, atol=1e-12)


def test_is_hermitian_threshold():
    q = h.quadrature(6)
    assert h.is_hermitian(q)
    assert not h.is_hermitian(h.annihilation(6))
    bumped = q.copy()
    bumped[0, 1] += 2e-12
    assert not h.is_hermitian(bumped)


# states -------------------------------------------------------------------

def test_fock_vacuum():
    np.testing.assert_array_equal(h.fock_state(4, 0), [1, 0, 0, 0])


def test_fock_24_msd():
    assert h.msd(h.annihilation(30), h.fock_state(30, 24)) == pytest.approx(24, abs=1e-12)


def test_fock_out_of_range():
    with pytest.raises(IndexError):
        h.fock_state(4, 7)
    with pytest.raises(IndexError):
        h.fock_state(4, -1)


def test_coherent_vacuum():
    np.testing.assert_allclose(h.coherent_state(16, 0), h.fock_state(16, 0))


def test_coherent_alpha4_eigenstate():
    # dim=40 loses 3e-7 of probability for alpha=4, above the 1e-8 tail rule (ledger)
    with pytest.raises(TruncationError):
        h.coherent_state(40, 4)
    psi = h.coherent_state(60, 4)
    a = h.annihilation(60)
    assert abs(h.expectation(a, psi) - 4) < 1e-6
    assert h.msd(a, psi) <= 1e-10


def test_coherent_matches_displacement_oracle():
    alpha = 1.5 - 0.7j
    np.testing.assert_allclose(h.coherent_state(40, alpha), oracles.displaced_squeezed(40, alpha),
                               atol=1e-10)


def test_coherent_truncation_error():
    with pytest.raises(TruncationError):
        h.coherent_state(8, 4)


def test_cat_moments():
    psi = h.cat_state(60, 4)
    a = h.annihilation(60)
    assert abs(h.expectation(a, psi)) < 1e-12
    assert h.msd(a, psi) == pytest.approx(oracles.cat_sigma2(4), abs=1e-8)
    assert h.msd(a, psi) == pytest.approx(16.0, abs=1e-3)


def test_cat_parity():
    psi = h.cat_state(60, 4)
    assert np.max(np.abs(psi[1::2])) == 0


def test_cat_vacuum_limit():
    np.testing.assert_allclose(h.cat_state(16, 0), h.fock_state(16, 0))


def test_squeezed_vacuum_limit():
    np.testing.assert_allclose(h.squeezed_state(20, h.SqueezedParams(0, 0)), h.fock_state(20, 0))


@pytest.mark.parametrize("dim", [80])
def test_squeezed_moments(dim):
    psi = h.squeezed_state(dim, h.SqueezedParams(0.6))
    a = h.annihilation(dim)
    assert h.msd(a, psi) == pytest.approx(0.5625, abs=1e-10)
    assert h.covariance(a.conj().T, a, psi) == pytest.approx(0.9375, abs=1e-10)


def test_squeezed_dim30_is_truncation_limited():
    # the recurrence residual at dim=30 is ~9e-4 for gamma=0.6 (ledger); moments still agree
    with pytest.raises(TruncationError):
        h.squeezed_state(30, h.SqueezedParams(0.6))
    psi = h.squeezed_state(30, h.SqueezedParams(0.6), tol=1e-2)
    assert h.msd(h.annihilation(30), psi) == pytest.approx(0.5625, abs=1e-4)


@pytest.mark.parametrize("beta,r,theta", [(0.0, 0.5, 0.0), (1.0 + 0.5j, 0.4, 1.1), (-0.8j, 0.7, -2.0)])
def test_squeezed_matches_operator_oracle(beta, r, theta):
    gamma, alpha = oracles.squeeze_labels(beta, r, theta)
    psi = h.squeezed_state(100, h.SqueezedParams(gamma, alpha))
    ref = oracles.displaced_squeezed(100, beta, r, theta)
    overlap = abs(np.vdot(ref, psi))
    assert overlap == pytest.approx(1.0, abs=1e-10)


def test_squeezed_params_domain():
    with pytest.raises(DomainError):
        h.SqueezedParams(1.0)
    with pytest.raises(DomainError):
        h.SqueezedParams(0.8 + 0.8j)


@given(st.floats(0, 0.6), st.floats(-np.pi, np.pi), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_squeezed_residual_invariant(g, phi, ar, ai):
    params = h.SqueezedParams(g * np.exp(1j * phi), complex(ar, ai))
    try:
        psi = h.squeezed_state(70, params)
    except TruncationError:
        assume(False)
    assert h.squeeze_residual(psi, params.gamma, params.alpha) < 1e-8
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


@pytest.mark.parametrize("builder", [
    lambda: h.fock_state(10, 3), lambda: h.coherent_state(30, 2 - 1j),
    lambda: h.cat_state(40, 2.5), lambda: h.superposition(h.fock_state(24, 7), h.fock_state(24, 9))])
def test_unit_norm(builder):
    assert abs(np.linalg.norm(builder()) - 1) < 1e-10


def test_top_population():
    psi = h.superposition(h.fock_state(6, 0), h.fock_state(6, 5))
    assert h.top_population(psi) == pytest.approx(0.5)
    assert h.top_population(h.fock_state(6, 3)) == 0


# moments ------------------------------------------------------------------

def test_expectation_examples():
    assert h.expectation(h.number(6), h.fock_state(6, 3)) == pytest.approx(3)
    assert abs(h.expectation(h.annihilation(30), h.coherent_state(30, 2)) - 2) < 1e-6
    psi = h.normalize(np.arange(1, 6) + 1j)
    assert h.expectation(h.identity(5), psi) == pytest.approx(1)


def test_covariance_examples():
    a = h.annihilation(30)
    assert abs(h.covariance(a, a, h.coherent_state(30, 1 + 1j))) < 1e-10
    assert abs(h.covariance(a.conj().T, a, h.fock_state(30, 24))) == 0
    for n in (0, 5, 12):
        assert h.covariance(a, a, h.fock_state(30, n)) == pytest.approx(n)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        h.expectation(h.number(4), h.fock_state(5, 0))
    with pytest.raises(DimensionError):
        h.covariance(h.number(4), h.number(5), h.fock_state(4, 0))


def test_batched_moments_match_rows(rng):
    a = h.annihilation(7)
    batch = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    batch /= np.linalg.norm(batch, axis=1, keepdims=True)
    np.testing.assert_allclose(h.msd(a, batch), [h.msd(a, row) for row in batch])
    np.testing.assert_allclose(h.covariance(a.conj().T, a, batch),
                               [h.covariance(a.conj().T, a, row) for row in batch])


@given(states(min_dim=2, max_dim=8))
def test_moments_match_amplitude_sums(psi):
    a = h.annihilation(len(psi))
    ea, s2, s = oracles.moments(psi)
    assert abs(h.expectation(a, psi) - ea) < 1e-12
    assert abs(h.msd(a, psi) - s2) < 1e-11
    assert abs(h.covariance(a.conj().T, a, psi) - s) < 1e-11


@given(st.data())
def test_hermitian_expectations_real(data):
    dim = data.draw(st.integers(2, 8))
    m = data.draw(matrices(dim))
    psi = data.draw(states(dim=dim))
    herm = m + m.conj().T
    assert abs(np.imag(h.expectation(herm, psi))) < 1e-12


@given(st.data())
def test_msd_nonnegative(data):
    dim = data.draw(st.integers(2, 8))
    L = data.draw(matrices(dim))
    psi = data.draw(states(dim=dim))
    assert h.msd(L, psi) >= -1e-12
    assert abs(np.imag(h.covariance(L, L, psi))) < 1e-12


@given(st.data())
def test_covariance_conjugate_symmetry(data):
    dim = data.draw(st.integers(2, 8))
    A = data.draw(matrices(dim))
    B = data.draw(matrices(dim))
    psi = data.draw(states(dim=dim))
    assert abs(np.conj(h.covariance(A, B, psi)) - h.covariance(B, A, psi)) < 1e-12
