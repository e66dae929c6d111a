import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partialcur.baselines import cur_e
from partialcur.curplus import (
    CurPlusConfig,
    UnderdeterminedError,
    build_bases,
    cur_plus,
    gradient,
    normal_equations,
    objective,
    solve_z,
)
from partialcur.diagnostics import error_metrics, incoherence_mu, recovery_budgets
from partialcur.matcore import ObservationSet, SampleSelection, apply_mask
from partialcur.sampling import sample_entries, sample_rows_cols
from partialcur.spectra import RankDeficientSampleError, frobenius_norm_diff
from partialcur.synth import SpectrumSpec, gen_low_rank, gen_skewed, haar_orthonormal


def random_obs(M, k, g):
    n, m = M.shape
    flat = g.choice(n * m, size=k, replace=False)
    return apply_mask(M, (flat // m, flat % m))


def kron_hessian(obs, U, V):
    """Reference: sum over observed cells of kron(u_i, v_j) kron(u_i, v_j)^T."""
    X = np.stack([np.kron(U[i], V[j]) for i, j in zip(obs.rows, obs.cols)])
    return X.T @ X, X.T @ obs.values


def lstsq_core(obs, U, V):
    X = np.stack([np.kron(U[i], V[j]) for i, j in zip(obs.rows, obs.cols)])
    z, *_ = np.linalg.lstsq(X, obs.values, rcond=None)
    return z.reshape(U.shape[1], V.shape[1])


def subspace_gap(Q, P):
    return float(np.linalg.norm(P - Q @ (Q.T @ P), 2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.integers(1, 3), frac=st.floats(0.2, 1.0))
def test_hessian_matches_kron_reference(seed, r, frac):
    g = np.random.default_rng(seed)
    M = g.standard_normal((8, 6))
    obs = random_obs(M, max(1, int(frac * 48)), g)
    U, V = haar_orthonormal(8, r, g), haar_orthonormal(6, r, g)
    H, rhs = normal_equations(obs, U, V)
    H_ref, rhs_ref = kron_hessian(obs, U, V)
    np.testing.assert_allclose(H, H_ref, atol=1e-13 * max(1.0, np.abs(H_ref).max()))
    np.testing.assert_allclose(rhs, rhs_ref, atol=1e-13 * max(1.0, np.abs(rhs_ref).max()))


def test_full_information_optimum(rng):
    M = gen_low_rank(12, 9, 3, seed=4)
    U, s, Vt = np.linalg.svd(M)
    U, V = U[:, :3], Vt[:3].T
    obs = apply_mask(M, [(i, j) for i in range(12) for j in range(9)])
    Z, _ = solve_z(obs, U, V, CurPlusConfig(3, 3, len(obs)))
    ref = U.T @ M @ V
    assert np.linalg.norm(Z - ref) <= 1e-9 * np.linalg.norm(ref)


def test_direct_and_cg_agree(rng):
    M = rng.standard_normal((6, 5))
    obs = random_obs(M, 17, rng)
    U, V = haar_orthonormal(6, 2, rng), haar_orthonormal(5, 2, rng)
    Zd, rd = solve_z(obs, U, V, CurPlusConfig(2, 2, 17, solver="direct"))
    Zc, rc = solve_z(obs, U, V, CurPlusConfig(2, 2, 17, solver="cg"))
    assert rd.solver == "direct" and rc.solver == "cg" and rc.converged
    assert np.linalg.norm(Zd - Zc) <= 1e-8 * np.linalg.norm(Zd)
    np.testing.assert_allclose(Zd, lstsq_core(obs, U, V), rtol=1e-9, atol=1e-12)


def test_single_entry_is_underdetermined(rng):
    M = rng.standard_normal((4, 4))
    obs = apply_mask(M, [(1, 2)])
    U, V = haar_orthonormal(4, 2, rng), haar_orthonormal(4, 2, rng)
    with pytest.raises(UnderdeterminedError, match="underdetermined") as exc:
        solve_z(obs, U, V, CurPlusConfig(2, 2, 1))
    assert "lambda_min" in str(exc.value)


def test_singular_hessian_is_underdetermined(rng):
    # r^2 = 4 cells, but all in one row: the u-direction collapses
    M = rng.standard_normal((5, 6))
    obs = apply_mask(M, [(0, j) for j in range(6)])
    U, V = haar_orthonormal(5, 2, rng), haar_orthonormal(6, 2, rng)
    with pytest.raises(UnderdeterminedError):
        solve_z(obs, U, V, CurPlusConfig(2, 2, 6))
    Z, rep = solve_z(obs, U, V, CurPlusConfig(2, 2, 6, ridge=1e-3))
    assert np.all(np.isfinite(Z))


def test_cg_non_convergence_is_flagged(rng):
    M = rng.standard_normal((10, 10))
    obs = random_obs(M, 60, rng)
    U, V = haar_orthonormal(10, 3, rng), haar_orthonormal(10, 3, rng)
    _, rep = solve_z(obs, U, V, CurPlusConfig(3, 3, 60, solver="cg", cg_max_iters=1, cg_tol=1e-14))
    assert not rep.converged and rep.final_residual > 0


def test_config_validation():
    with pytest.raises(ValueError):
        CurPlusConfig(r=4, d=3, omega_size=10)
    with pytest.raises(ValueError):
        CurPlusConfig(r=1, d=3, omega_size=0)
    with pytest.raises(ValueError):
        CurPlusConfig(r=1, d=3, omega_size=5, solver="newton")
    assert CurPlusConfig(r=3, d=3, omega_size=5).max_cg_iters == 90
    assert CurPlusConfig(r=51, d=60, omega_size=5).resolved_solver() == "cg"
    assert CurPlusConfig(r=50, d=60, omega_size=5).resolved_solver() == "direct"


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_matches_central_differences(seed):
    g = np.random.default_rng(seed)
    M = g.standard_normal((5, 4))
    obs = random_obs(M, 12, g)
    U, V = haar_orthonormal(5, 2, g), haar_orthonormal(4, 2, g)
    Z = g.standard_normal((2, 2))
    G = gradient(Z, obs, U, V)
    h = 1e-6
    fd = np.zeros_like(Z)
    for a in range(2):
        for b in range(2):
            E = np.zeros_like(Z)
            E[a, b] = h
            fd[a, b] = (objective(Z + E, obs, U, V) - objective(Z - E, obs, U, V)) / (2 * h)
    assert np.linalg.norm(G - fd) < 1e-5 * max(np.linalg.norm(fd), 1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.integers(1, 3))
def test_returned_core_is_stationary_and_no_worse(seed, r):
    g = np.random.default_rng(seed)
    M = g.standard_normal((9, 7))
    obs = random_obs(M, 40, g)
    U, V = haar_orthonormal(9, r, g), haar_orthonormal(7, r, g)
    Z, rep = solve_z(obs, U, V, CurPlusConfig(r, r, 40))
    rhs_scale = np.linalg.norm(gradient(np.zeros((r, r)), obs, U, V))
    assert np.linalg.norm(gradient(Z, obs, U, V)) <= 1e-8 * rhs_scale
    assert rep.objective_value <= objective(U.T @ M @ V, obs, U, V) * (1 + 1e-12)
    assert rep.final_residual >= 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_exact_recovery_with_true_bases(seed):
    g = np.random.default_rng(seed)
    M = g.standard_normal((15, 3)) @ g.standard_normal((3, 12))
    U, s, Vt = np.linalg.svd(M)
    obs = random_obs(M, 60, g)
    U, V = U[:, :3], Vt[:3].T
    try:
        Z, _ = solve_z(obs, U, V, CurPlusConfig(3, 3, 60))
    except UnderdeterminedError:
        return
    assert np.linalg.norm(M - U @ Z @ V.T) <= 1e-8 * np.linalg.norm(M)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_permuting_observations_is_harmless(seed):
    g = np.random.default_rng(seed)
    M = g.standard_normal((10, 8))
    obs = random_obs(M, 35, g)
    U, V = haar_orthonormal(10, 3, g), haar_orthonormal(8, 3, g)
    cfg = CurPlusConfig(3, 3, 35)
    Z1, _ = solve_z(obs, U, V, cfg)
    Z2, _ = solve_z(obs.permuted(g.permutation(35)), U, V, cfg)
    assert np.linalg.norm(Z1 - Z2) <= 1e-12 * np.linalg.norm(Z1)


def test_bases_span_true_column_space():
    M = gen_low_rank(40, 30, 4, seed=8)
    sel = sample_rows_cols(M, 8, seed=1)
    Ub, Vb = build_bases(sel, 4)
    U, s, Vt = np.linalg.svd(M)
    assert subspace_gap(Ub.Q, U[:, :4]) < 1e-8
    assert subspace_gap(Vb.Q, Vt[:4].T) < 1e-8


def test_bases_of_identity_follow_samples():
    M = np.eye(10)
    sel = SampleSelection.from_matrix(M, [2, 7, 5], [1, 4, 8])
    Ub, Vb = build_bases(sel, 3)
    assert subspace_gap(Ub.Q, np.eye(10)[:, [2, 7, 5]]) < 1e-12
    assert subspace_gap(Vb.Q, np.eye(10)[:, [1, 4, 8]]) < 1e-12


def test_bases_rank_deficient_hint(rng):
    M = np.outer(rng.standard_normal(10), rng.standard_normal(9))
    sel = sample_rows_cols(M, 4, seed=0)
    with pytest.raises(RankDeficientSampleError, match="increase d"):
        build_bases(sel, 2)


def test_recovery_at_sample_complexity_budgets():
    # at n = 100 the recovery budgets overshoot the matrix; cap at the grid
    n, r = 100, 5
    passes = 0
    for trial in range(10):
        M = gen_low_rank(n, n, r, seed=500 + trial)
        d, omega = recovery_budgets(incoherence_mu(M, r), r)
        d, omega = min(d, n), min(omega, n * n)
        approx, _ = cur_plus(sample_rows_cols(M, d, seed=trial), sample_entries(M, omega, seed=trial),
                             CurPlusConfig(r, d, omega))
        passes += frobenius_norm_diff(M, approx) / np.linalg.norm(M) <= 2e-4
    assert passes >= 9


def test_zero_matrix():
    M = np.zeros((20, 15))
    approx, rep = cur_plus(sample_rows_cols(M, 5, seed=0), sample_entries(M, 40, seed=0), CurPlusConfig(3, 5, 40))
    np.testing.assert_array_equal(approx.Z, 0.0)
    assert frobenius_norm_diff(M, approx) == 0.0 and rep.objective_value == 0.0


def test_full_rank_matrix_beats_cur_e():
    M = gen_skewed(60, 60, SpectrumSpec("power_decay", r=5, decay_exponent=2.0), seed=3)
    sel = sample_rows_cols(M, 30, seed=9)
    obs = sample_entries(M, 900, seed=9)
    approx, _ = cur_plus(sel, obs, CurPlusConfig(5, 30, 900))
    base = cur_e(obs, sel.col_indices, sel.row_indices, sel.A, sel.B)
    ours = error_metrics(M, approx, 5).ell_s
    theirs = error_metrics(M, base, 5).ell_s
    assert np.isfinite(ours) and ours <= theirs


def test_shape_mismatch_rejected(rng):
    M = rng.standard_normal((6, 5))
    sel = sample_rows_cols(M, 3, seed=0)
    obs = ObservationSet([0], [0], [1.0], (5, 6))
    with pytest.raises(ValueError):
        cur_plus(sel, obs, CurPlusConfig(2, 3, 1))
