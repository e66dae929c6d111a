import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partialcur.matcore import FactoredLowRank
from partialcur.spectra import (
    RankDeficientSampleError,
    frobenius_norm_diff,
    full_svd,
    pseudoinverse,
    spectral_norm_diff,
    top_r_left_eigvecs,
    truncated_svd,
)
from partialcur.synth import haar_orthonormal


def principal_angle_sin(Q1, Q2):
    """Largest sine of the principal angles between two orthonormal bases."""
    return float(np.linalg.norm(Q2 - Q1 @ (Q1.T @ Q2), 2))


def test_canonical_columns():
    X = np.eye(8)[:, :3]
    basis = top_r_left_eigvecs(X, 3)
    np.testing.assert_allclose(basis.eigvals, 1.0, rtol=1e-14)
    assert principal_angle_sin(basis.Q, X) < 1e-12


def test_eigvecs_match_dense_eigensolver(rng):
    X = rng.standard_normal((30, 10))
    basis = top_r_left_eigvecs(X, 4)
    lam, W = np.linalg.eigh(X @ X.T)
    ref = W[:, ::-1][:, :4]
    assert principal_angle_sin(basis.Q, ref) < 1e-8
    np.testing.assert_allclose(basis.eigvals, lam[::-1][:4], rtol=1e-9)


def test_duplicate_column_is_rank_deficient(rng):
    X = rng.standard_normal((12, 4))
    X[:, 3] = X[:, 1]
    with pytest.raises(RankDeficientSampleError, match="rank-deficient sample"):
        top_r_left_eigvecs(X, 4)


def test_wide_sample_falls_back_to_outer_gram(rng):
    X = rng.standard_normal((6, 15))
    basis = top_r_left_eigvecs(X, 3)
    lam, W = np.linalg.eigh(X @ X.T)
    assert principal_angle_sin(basis.Q, W[:, ::-1][:, :3]) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 40), data=st.data())
def test_eigvals_are_squared_singular_values(seed, n, data):
    d = data.draw(st.integers(1, n))
    r = data.draw(st.integers(1, d))
    X = np.random.default_rng(seed).standard_normal((n, d))
    basis = top_r_left_eigvecs(X, r)
    s = np.linalg.svd(X, compute_uv=False)
    # relative to the operator scale: the Gram route resolves small
    # eigenvalues only to about eps * lambda_max
    np.testing.assert_allclose(basis.eigvals, s[:r] ** 2, rtol=1e-9, atol=1e-9 * s[0] ** 2)
    np.testing.assert_allclose(basis.Q.T @ basis.Q, np.eye(r), atol=1e-10)
    assert np.all(np.diff(basis.eigvals) <= 0)


def test_truncated_svd_diag():
    res = truncated_svd(np.diag([5.0, 3.0, 1.0]), 2)
    np.testing.assert_allclose(res.sigma, [5.0, 3.0])
    assert res.sigma_next == pytest.approx(1.0)
    assert res.tail_frobenius == pytest.approx(1.0)


def test_truncated_svd_rank_one(rng):
    u, v = rng.standard_normal(7), rng.standard_normal(5)
    res = truncated_svd(np.outer(u, v), 1)
    assert res.sigma[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-13)
    assert res.sigma_next <= 1e-14 * res.sigma[0]


def test_truncated_svd_against_reference(rng):
    M = rng.standard_normal((40, 25))
    res = truncated_svd(M, 6)
    s = np.linalg.svd(M, compute_uv=False)
    np.testing.assert_allclose(np.append(res.sigma, res.sigma_next), s[:7], rtol=1e-9)


def test_truncated_svd_rejects_full_rank_request():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 3)


def test_full_svd_reconstructs(rng):
    M = rng.standard_normal((9, 6))
    res = full_svd(M)
    rec = (res.U * res.sigma) @ res.V.T
    assert np.linalg.norm(rec - M) <= 1e-9 * np.linalg.norm(M)


def _exact_factorization(M, r):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return FactoredLowRank(U[:, :r], np.diag(s[:r]), Vt[:r].T)


def test_spectral_norm_of_exact_factorization(rng):
    M = rng.standard_normal((20, 3)) @ rng.standard_normal((3, 15))
    res = spectral_norm_diff(M, _exact_factorization(M, 3))
    assert res.value <= 1e-7 * np.linalg.norm(M, 2)


def test_spectral_norm_zero_core_matches_svd(rng):
    M = rng.standard_normal((20, 20))
    approx = FactoredLowRank(haar_orthonormal(20, 3, rng), np.zeros((3, 3)), haar_orthonormal(20, 3, rng))
    res = spectral_norm_diff(M, approx, tol=1e-14, max_iters=20000)
    assert res.converged
    assert res.value == pytest.approx(np.linalg.norm(M, 2), rel=1e-6)


def test_spectral_norm_of_identity():
    approx = FactoredLowRank(np.eye(6, 1), np.zeros((1, 1)), np.eye(6, 1))
    assert spectral_norm_diff(np.eye(6), approx).value == pytest.approx(1.0, rel=1e-12)


def test_start_vector_in_null_space_restarts():
    # residual whose row space is orthogonal to the fixed start vector
    x0 = np.ones(4)
    x0[0] += 1.0
    w = np.array([1.0, -2.0, 0.0, 0.0])
    assert abs(w @ x0) < 1e-15
    M = np.outer(np.array([1.0, 0.0, 0.0]), w)
    approx = FactoredLowRank(np.eye(3, 1), np.zeros((1, 1)), np.eye(4, 1))
    res = spectral_norm_diff(M, approx, tol=1e-12)
    assert res.value == pytest.approx(np.linalg.norm(w), rel=1e-10)


def test_unconverged_flag(rng):
    M = rng.standard_normal((30, 30))
    approx = FactoredLowRank(np.eye(30, 1), np.zeros((1, 1)), np.eye(30, 1))
    res = spectral_norm_diff(M, approx, tol=0.0, max_iters=3)
    assert not res.converged and res.iterations == 3 and res.value > 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_power_iteration_monotone_and_below_frobenius(seed):
    g = np.random.default_rng(seed)
    M = g.standard_normal((12, 9))
    approx = FactoredLowRank(haar_orthonormal(12, 2, g), g.standard_normal((2, 2)), haar_orthonormal(9, 2, g))
    res = spectral_norm_diff(M, approx)
    q = np.array(res.quotients)
    assert np.all(np.diff(q) >= -1e-12 * q.max())
    assert res.value <= frobenius_norm_diff(M, approx) * (1 + 1e-12)


def test_frobenius_blocks_match_dense(rng):
    M = rng.standard_normal((10, 23))
    approx = FactoredLowRank(haar_orthonormal(10, 3, rng), rng.standard_normal((3, 3)), haar_orthonormal(23, 3, rng))
    dense = np.linalg.norm(M - approx.to_dense())
    assert frobenius_norm_diff(M, approx, block=4) == pytest.approx(dense, rel=1e-13)


def test_pinv_diag():
    np.testing.assert_array_equal(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


def test_pinv_isometry(rng):
    Q = haar_orthonormal(9, 4, rng)
    np.testing.assert_allclose(pseudoinverse(Q), Q.T, atol=1e-14)


def test_pinv_left_inverse(rng):
    X = rng.standard_normal((8, 5))
    np.testing.assert_allclose(pseudoinverse(X) @ X, np.eye(5), atol=1e-10)


def test_pinv_zero_matrix():
    np.testing.assert_array_equal(pseudoinverse(np.zeros((3, 2))), np.zeros((2, 3)))


def penrose_residuals(X, P):
    scale = lambda A: max(np.linalg.norm(A), 1e-300)  # noqa: E731
    return (
        np.linalg.norm(X @ P @ X - X) / scale(X),
        np.linalg.norm(P @ X @ P - P) / scale(P),
        np.linalg.norm((X @ P).T - X @ P) / scale(X @ P),
        np.linalg.norm((P @ X).T - P @ X) / scale(P @ X),
    )


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 7))
def test_penrose_conditions(seed, rank):
    g = np.random.default_rng(seed)
    X = g.standard_normal((10, rank)) @ g.standard_normal((rank, 7))
    P = pseudoinverse(X)
    assert max(penrose_residuals(X, P)) <= 1e-9
