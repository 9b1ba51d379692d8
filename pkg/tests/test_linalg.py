import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oqwlab.errors import NotHermitian, NotPSD
from oqwlab.linalg import frobenius_norm, hermitian_eig, psd_sqrt

from conftest import random_hermitian


def test_diagonal_input_is_already_solved():
    w, v = hermitian_eig(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(w, [1, 3])
    np.testing.assert_allclose(np.abs(v), np.eye(2), atol=1e-15)


def test_sigma_x():
    w, v = hermitian_eig([[0, 1], [1, 0]])
    np.testing.assert_allclose(w, [-1, 1], atol=1e-15)
    # eigenvectors (1, -1)/sqrt2 and (1, 1)/sqrt2 up to phase
    for k, sign in enumerate([-1, 1]):
        ref = np.array([1, sign]) / np.sqrt(2)
        assert abs(abs(np.vdot(ref, v[:, k])) - 1) < 1e-14


def test_characteristic_polynomial_roots():
    # lambda^2 - 4 lambda + 3 = 0
    roots = np.sort(np.roots([1, -4, 3]))
    np.testing.assert_allclose(hermitian_eig([[2, 1], [1, 2]]).eigenvalues, roots, rtol=1e-14)


def test_complex_entries_match_lapack(rng):
    for n in range(1, 9):
        m = random_hermitian(rng, n)
        np.testing.assert_allclose(hermitian_eig(m).eigenvalues, np.linalg.eigvalsh(m), atol=1e-12)


def test_not_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eig([[0, 1], [0, 0]])


def test_zero_matrix():
    w, v = hermitian_eig(np.zeros((3, 3)))
    assert np.all(w == 0)
    np.testing.assert_allclose(v, np.eye(3))


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    r = psd_sqrt(m)
    assert frobenius_norm(r @ r - m) <= 1e-10 * frobenius_norm(m)
    # eigenvalue route: sqrt(1), sqrt(3) in the eigenbasis of m
    np.testing.assert_allclose(np.linalg.eigvalsh(r), [1.0, np.sqrt(3.0)], rtol=1e-13)


def test_psd_sqrt_clamps_roundoff_and_rejects_negative():
    r = psd_sqrt(np.diag([1.0, -1e-14]))
    np.testing.assert_allclose(r, np.diag([1.0, 0.0]), atol=1e-15)
    with pytest.raises(NotPSD):
        psd_sqrt(np.diag([1.0, -1e-3]))


@pytest.mark.parametrize(
    "m, expected",
    [(np.zeros((2, 2)), 0.0), (np.eye(2), np.sqrt(2.0)), (np.array([[3, 4], [0, 0]]), 5.0)],
)
def test_frobenius_norm(m, expected):
    assert frobenius_norm(m) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_reconstruction_and_orthonormality(n, seed):
    m = random_hermitian(np.random.default_rng(seed), n)
    es = hermitian_eig(m)
    assert frobenius_norm(es.reconstruct() - m) <= 1e-10 * frobenius_norm(m)
    v = es.eigenvectors
    assert frobenius_norm(v.conj().T @ v - np.eye(n)) <= 1e-12
    assert np.all(np.diff(es.eigenvalues) >= 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_sqrt_of_random_psd(n, seed):
    r = np.random.default_rng(seed)
    g = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    m = g @ g.conj().T
    s = psd_sqrt(m)
    assert frobenius_norm(s @ s - m) <= 1e-10 * frobenius_norm(m)
    np.testing.assert_allclose(
        np.linalg.eigvalsh(s), np.sqrt(np.clip(np.linalg.eigvalsh(m), 0, None)), atol=1e-10
    )
