import numpy as np
import pytest
from hypothesis import given, strategies as st

from sojourn_lab.spectral import (
    HermitianOperator,
    ReducedResolvent,
    SingularPointError,
    SpectralMeasure,
    as_state,
    measure_residual_norm,
    reduced_resolvent_expectation,
    residual_norm,
    resolvent_expectation,
    spectral_measure,
)

from conftest import random_hermitian, random_state

seeds = st.integers(0, 2**32 - 1)


# -- HermitianOperator -------------------------------------------------------

def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianOperator([[0.0, 1.0], [0.0, 0.0]])


def test_rejects_non_square():
    with pytest.raises(ValueError):
        HermitianOperator(np.zeros((2, 3)))


def test_entries_are_read_only():
    H = HermitianOperator(np.eye(2))
    with pytest.raises(ValueError):
        H.entries[0, 0] = 3.0


@given(seeds, st.integers(1, 20))
def test_operator_invariants(seed, n):
    rng = np.random.default_rng(seed)
    H = HermitianOperator(random_hermitian(rng, n))
    H.check_invariants()
    assert np.all(np.diff(H.eigenvalues) >= 0)


def test_diagonal_fast_path_sorted():
    H = HermitianOperator(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(H.eigenvalues, [-1, 2, 3])
    vals, vecs = H.eig
    assert np.allclose((vecs * vals) @ vecs.T, H.entries)


def test_state_normalization():
    with pytest.raises(ValueError):
        as_state([1.0, 1.0])
    assert np.isclose(np.linalg.norm(as_state([1.0, 1.0], normalize=True)), 1.0)


# -- spectral_measure -------------------------------------------------------

def test_measure_one_by_one():
    mu = spectral_measure(HermitianOperator([[0.0]]), [1.0])
    assert mu.points == [(0.0, 1.0)]


def test_measure_symmetric_superposition():
    mu = spectral_measure(HermitianOperator(np.diag([-1.0, 1.0])), np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(mu.energies, [-1, 1])
    assert np.allclose(mu.weights, [0.5, 0.5])


def test_measure_matches_independent_eigensolve(rng):
    A = random_hermitian(rng, 8)
    psi = random_state(rng, 8)
    mu = spectral_measure(HermitianOperator(A), psi)
    vals, vecs = np.linalg.eigh(A)
    assert np.isclose(mu.weights.sum(), 1.0, atol=1e-12)
    assert np.allclose(mu.energies, vals, atol=1e-12)
    assert np.allclose(mu.weights, np.abs(vecs.conj().T @ psi) ** 2, atol=1e-12)


def test_measure_merges_degenerate_levels():
    H = HermitianOperator(np.diag([1.0, 1.0, 2.0]))
    mu = spectral_measure(H, np.array([1.0, 1.0, 1.0]) / np.sqrt(3))
    assert np.allclose(mu.energies, [1.0, 2.0])
    assert np.allclose(mu.weights, [2 / 3, 1 / 3])


def test_measure_dimension_mismatch():
    with pytest.raises(ValueError):
        spectral_measure(HermitianOperator(np.eye(3)), [1.0, 0.0])


@given(seeds, st.integers(2, 12))
def test_measure_unitary_invariance(seed, n):
    rng = np.random.default_rng(seed)
    A = random_hermitian(rng, n)
    psi = random_state(rng, n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    mu1 = spectral_measure(HermitianOperator(A), psi)
    mu2 = spectral_measure(HermitianOperator(Q @ A @ Q.conj().T), Q @ psi)
    assert len(mu1) == len(mu2)
    assert np.allclose(mu1.weights, mu2.weights, atol=1e-9)
    assert np.allclose(mu1.energies, mu2.energies, atol=1e-9)


def test_measure_validation():
    with pytest.raises(ValueError):
        SpectralMeasure(np.array([0.0, 1.0]), np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        SpectralMeasure(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        SpectralMeasure(np.array([0.0, 1.0]), np.array([1.5, -0.5]))


# -- resolvent_expectation ----------------------------------------------------

def test_resolvent_point_mass():
    assert np.isclose(resolvent_expectation(SpectralMeasure.point_mass(0.0), 1j), 1j)


def test_resolvent_two_point():
    mu = SpectralMeasure.from_points([-1.0, 1.0], [0.5, 0.5])
    assert np.isclose(resolvent_expectation(mu, 1j), 0.5j)


def test_resolvent_linear_solve_oracle(rng):
    A = random_hermitian(rng, 8)
    psi = random_state(rng, 8)
    z = 0.3 + 0.1j
    x = np.linalg.solve(A - z * np.eye(8), psi)
    mu = spectral_measure(HermitianOperator(A), psi)
    assert abs(resolvent_expectation(mu, z) - np.vdot(psi, x)) <= 1e-10


def test_resolvent_rejects_real_z():
    with pytest.raises(ValueError):
        resolvent_expectation(SpectralMeasure.point_mass(0.0), 0.5)


@given(seeds, st.integers(1, 15), st.floats(-3, 3), st.floats(1e-3, 5))
def test_herglotz_and_reflection(seed, n, x, y):
    rng = np.random.default_rng(seed)
    mu = spectral_measure(HermitianOperator(random_hermitian(rng, n)), random_state(rng, n))
    g = resolvent_expectation(mu, complex(x, y))
    assert g.imag > 0
    assert abs(resolvent_expectation(mu, complex(x, -y)) - np.conj(g)) <= 1e-12 * max(1, abs(g))


# -- reduced resolvent ---------------------------------------------------------

def test_reduced_one_dimensional_complement():
    H = HermitianOperator(np.diag([0.0, 5.0]))
    val = reduced_resolvent_expectation(H, [1.0, 0.0], [0.0, 1.0], 1j)
    assert np.isclose(val, 1.0 / (5.0 - 1j), atol=1e-14)


def test_reduced_vector_in_range_gives_zero(rng):
    H = HermitianOperator(random_hermitian(rng, 5))
    p = random_state(rng, 5)
    assert abs(reduced_resolvent_expectation(H, p, 2.5 * p, 0.1 + 1j)) <= 1e-13


def _explicit_complement(A, p, v, z):
    n = A.shape[0]
    # orthonormal basis of the complement of p from a full QR
    Q, _ = np.linalg.qr(np.column_stack([p, np.eye(n)[:, : n - 1]]))
    B = Q[:, 1:]
    Hc = B.conj().T @ A @ B
    c = B.conj().T @ v
    return np.vdot(c, np.linalg.solve(Hc - z * np.eye(n - 1), c))


@given(seeds)
def test_reduced_matches_explicit_complement(seed):
    rng = np.random.default_rng(seed)
    A = random_hermitian(rng, 6)
    p = random_state(rng, 6)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    z = 0.4 + 0.3j
    got = reduced_resolvent_expectation(HermitianOperator(A), p, v, z)
    assert abs(got - _explicit_complement(A, p, v, z)) <= 1e-10 * max(1, abs(got))


def test_reduced_block_diagonal_reduces_to_plain_resolvent(rng):
    B = random_hermitian(rng, 4)
    A = np.zeros((5, 5), complex)
    A[0, 0] = 0.7
    A[1:, 1:] = B
    v = np.concatenate([[0.0], random_state(rng, 4)])
    z = -0.2 + 0.5j
    got = reduced_resolvent_expectation(HermitianOperator(A), np.eye(5)[0], v, z)
    mu = spectral_measure(HermitianOperator(B), v[1:])
    assert abs(got - resolvent_expectation(mu, z)) <= 1e-12


def test_reduced_singular_point():
    H = HermitianOperator(np.diag([0.0, 5.0]))
    with pytest.raises(SingularPointError):
        ReducedResolvent(H, [1.0, 0.0]).expectation([0.0, 1.0], 5.0 + 0j)


def test_bordered_matches_complement(rng):
    d = np.sort(rng.uniform(-2, 2, 40))
    p = random_state(rng, 40, real=True)
    v = rng.standard_normal(40)
    H = HermitianOperator(np.diag(d))
    z = 0.1 + 0.05j
    a = reduced_resolvent_expectation(H, p, v, z)
    b = reduced_resolvent_expectation(H, p, v, z, method="bordered")
    assert abs(a - b) <= 1e-10 * abs(a)


# -- residual norm --------------------------------------------------------------

def test_residual_eigenpair_zero():
    H = HermitianOperator(np.diag([1.0, 2.0]))
    assert residual_norm(H, [1.0, 0.0], 1.0) == 0.0


def test_residual_two_point():
    mu = SpectralMeasure.from_points([-1.0, 1.0], [0.5, 0.5])
    assert np.isclose(measure_residual_norm(mu, 0.0), 1.0)


def test_residual_matvec_oracle(rng):
    A = random_hermitian(rng, 9)
    psi = random_state(rng, 9)
    H = HermitianOperator(A)
    a = residual_norm(H, psi, 0.37)
    b = measure_residual_norm(spectral_measure(H, psi), 0.37)
    assert abs(a - b) <= 1e-10
