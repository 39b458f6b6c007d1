import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lsaprecode.errors import ContractViolation, DimensionError, FactorizationError, SingularMatrixError
from lsaprecode.numerics import (
    RngStream, bessel_j0, cholesky, circular_convolve, dft, gaussian_complex, hermitian_eig,
    naive_dft, solve_hermitian,
)

from conftest import random_hpd

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def complex_vectors(min_size=1, max_size=64):
    return st.integers(min_size, max_size).flatmap(
        lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite))
    ).map(lambda ri: ri[0] + 1j * ri[1])


# -- dft ---------------------------------------------------------------------

def test_dft_of_impulse_is_all_ones():
    x = np.zeros(8, complex)
    x[0] = 1
    np.testing.assert_array_equal(dft(x, 8), np.ones(8))


def test_dft_round_trip_k512(rng):
    x = gaussian_complex(rng, 512)
    assert np.max(np.abs(dft(dft(x), inverse=True) - x)) < 1e-12


def test_fast_path_matches_naive_summation(rng):
    x = gaussian_complex(rng, 16)
    for inverse in (False, True):
        fast, slow = dft(x, 16, inverse=inverse), naive_dft(x, inverse=inverse)
        assert np.max(np.abs(fast - slow)) <= 1e-12 * np.max(np.abs(slow))


def test_naive_dft_handles_non_power_of_two(rng):
    x = gaussian_complex(rng, 12)
    n = np.arange(12)
    expected = np.array([np.sum(x * np.exp(-2j * np.pi * k * n / 12)) for k in range(12)])
    np.testing.assert_allclose(dft(x, naive=True), expected, atol=1e-12)


def test_dft_length_mismatch_raises():
    with pytest.raises(DimensionError):
        dft(np.ones(8), K=16)


def test_dft_along_axis(rng):
    x = gaussian_complex(rng, (3, 8, 2))
    np.testing.assert_allclose(dft(x, axis=1), naive_dft(x, axis=1), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(complex_vectors())
def test_parseval(x):
    X = dft(x)
    lhs, rhs = np.sum(np.abs(X) ** 2), len(x) * np.sum(np.abs(x) ** 2)
    assert abs(lhs - rhs) <= 1e-10 * max(rhs, 1e-300) + 1e-300


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 32).flatmap(lambda n: st.tuples(
    arrays(complex, n, elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)),
    arrays(complex, n, elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)))))
def test_circular_convolution_theorem(ab):
    a, b = ab
    lhs = dft(circular_convolve(a, b))
    rhs = dft(a) * dft(b)
    scale = np.sum(np.abs(a)) * np.sum(np.abs(b))
    assert np.max(np.abs(lhs - rhs), initial=0) <= 1e-10 * max(scale, 1e-300) + 1e-300


# -- hermitian_eig ------------------------------------------------------------

def test_eig_identity():
    w, V = hermitian_eig(np.eye(3))
    np.testing.assert_allclose(w, [1, 1, 1], atol=1e-15)


def test_eig_diagonal_sorted():
    w, _ = hermitian_eig(np.diag([9.0, 1.0, 4.0]))
    np.testing.assert_allclose(w, [1, 4, 9], atol=1e-14)


def test_eig_reconstruction_6x6(rng):
    A = random_hpd(rng, 6) - 0.5 * np.eye(6)
    w, V = hermitian_eig(A)
    assert np.linalg.norm(V @ np.diag(w) @ V.conj().T - A) < 1e-9
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(A @ V - V * w)) <= 1e-9 * np.linalg.norm(A, 2)


def test_eig_batched_matches_per_matrix(rng):
    A = np.stack([random_hpd(rng, 5) for _ in range(4)])
    w, V = hermitian_eig(A)
    for i in range(4):
        np.testing.assert_allclose(w[i], np.linalg.eigvalsh(A[i]), atol=1e-12)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_gram_eigenvalues_nonnegative(n, k, seed):
    X = gaussian_complex(RngStream(seed).generator(), (n, k))
    w, _ = hermitian_eig(X @ X.conj().T / n)
    assert np.all(w >= -1e-10)


# -- solve / cholesky -----------------------------------------------------------

def test_solve_identity(rng):
    B = gaussian_complex(rng, (3, 2))
    np.testing.assert_allclose(solve_hermitian(np.eye(3), B), B)


def test_solve_scaled_identity():
    np.testing.assert_allclose(solve_hermitian(2 * np.eye(4), np.eye(4)), 0.5 * np.eye(4))


def test_solve_matches_elimination(rng):
    A = random_hpd(rng, 5, shift=0.1)
    B = gaussian_complex(rng, (5, 3))
    X = solve_hermitian(A, B)
    np.testing.assert_allclose(X, np.linalg.solve(A, B), rtol=1e-10, atol=1e-12)
    assert np.linalg.norm(A @ X - B) <= 1e-10 * np.linalg.norm(B)


def test_solve_singular_reports_index_and_condition():
    A = np.stack([np.eye(2), np.array([[1.0, 1.0], [1.0, 1.0]])])
    with pytest.raises(SingularMatrixError) as info:
        solve_hermitian(A, np.ones((2, 2, 1)))
    assert info.value.index == (1,)
    assert info.value.condition > 1e12


def test_cholesky_examples():
    np.testing.assert_allclose(cholesky(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_cholesky_reconstruction(rng):
    A = random_hpd(rng, 7)
    L = cholesky(A)
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ L.conj().T - A) <= 1e-9 * np.linalg.norm(A)


def test_cholesky_semidefinite_gets_jitter():
    L = cholesky(np.ones((3, 3)))
    assert np.linalg.norm(L @ L.conj().T - np.ones((3, 3))) < 1e-9


def test_cholesky_indefinite_raises():
    with pytest.raises(FactorizationError):
        cholesky(np.diag([1.0, -1.0]))


# -- bessel -----------------------------------------------------------------------

def test_j0_values():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(1.0) - 0.7651976865579666) <= 1e-10
    assert abs(bessel_j0(2.404825557695773)) <= 1e-9


def _series_oracle(x, terms=30):
    total, term = 0.0, 1.0
    for k in range(terms):
        if k:
            term *= -(x * x / 4) / (k * k)
        total += term
    return total


def test_j0_first_zero_by_bisection():
    lo, hi = 2.0, 3.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _series_oracle(lo) * _series_oracle(mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert abs(bessel_j0(0.5 * (lo + hi))) <= 1e-9


def test_j0_accuracy_against_reference_table():
    # Abramowitz & Stegun Table 9.1 style reference points.
    ref = {5.0: -0.1775967713143383, 10.0: -0.2459357644513483, 20.0: 0.1670246643405831,
           50.0: 0.0558123276692518, 100.0: 0.0199858503042231}
    for x, v in ref.items():
        assert abs(bessel_j0(x) - v) <= 1e-10
        assert abs(bessel_j0(-x) - v) <= 1e-10


def test_j0_vectorised_matches_scipy():
    special = pytest.importorskip("scipy.special")
    x = np.linspace(-100, 100, 4001)
    assert np.max(np.abs(bessel_j0(x) - special.j0(x))) <= 1e-10


# -- random -----------------------------------------------------------------------

def test_gaussian_rejects_zero_variance(rng):
    with pytest.raises(ContractViolation):
        gaussian_complex(rng, 10, 0.0)


def test_gaussian_moments():
    z = gaussian_complex(RngStream(7, 0), 10 ** 6, 1.0)
    assert abs(np.mean(z)) < 0.005
    assert 0.995 <= np.mean(np.abs(z) ** 2) <= 1.005
    assert abs(np.var(z.real) - 0.5) < 0.005
    assert abs(np.mean(z * z)) < 0.005  # circular symmetry


def test_streams_are_deterministic_and_distinct():
    a = gaussian_complex(RngStream(5, 3), 100)
    b = gaussian_complex(RngStream(5, 3), 100)
    c = gaussian_complex(RngStream(5, 4), 100)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(RngStream(5, 3).generator(1).random(4), RngStream(5, 3).generator(2).random(4))
