"""Linear-algebra primitives: truncated eigenbases, SVD, pseudoinverse and
matrix-free norms of ``M - Mhat`` for factored approximations.

Approximations only need ``shape``, ``matvec``, ``rmatvec`` and
``columns(j0, j1)``; both :class:`~partialcur.matcore.FactoredLowRank` and
the CUR baselines provide them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

EPS = np.finfo(np.float64).eps

__all__ = [
    "RankDeficientSampleError",
    "TruncatedBasis",
    "SvdResult",
    "PowerIterationResult",
    "top_r_left_eigvecs",
    "truncated_svd",
    "full_svd",
    "spectral_norm_diff",
    "frobenius_norm_diff",
    "pseudoinverse",
]


class RankDeficientSampleError(ValueError):
    """Fewer than ``r`` Gram eigenvalues survive the numerical-rank cutoff."""

    def __init__(self, r: int, found: int, message: str | None = None):
        self.r = r
        self.found = found
        super().__init__(
            message
            or f"rank-deficient sample: need {r} eigenvalues above the cutoff, found {found}"
        )


@dataclass(frozen=True)
class TruncatedBasis:
    Q: np.ndarray
    eigvals: np.ndarray

    @property
    def rank(self) -> int:
        return self.Q.shape[1]


@dataclass(frozen=True)
class SvdResult:
    """Leading singular triplets.

    ``sigma_next`` is the first discarded singular value (0 when nothing is
    discarded) and ``spectrum`` holds every singular value of the matrix.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    sigma_next: float
    spectrum: np.ndarray = field(repr=False)

    @property
    def tail_frobenius(self) -> float:
        """Frobenius norm of ``M - M_r``, from the discarded singular values."""
        tail = self.spectrum[self.sigma.size:]
        return float(np.sqrt(tail @ tail))


class PowerIterationResult(NamedTuple):
    value: float
    converged: bool
    iterations: int
    quotients: list


def top_r_left_eigvecs(X, r: int) -> TruncatedBasis:
    """Top-``r`` eigenvectors of ``X @ X.T`` computed through the ``d x d`` Gram
    matrix ``X.T @ X``.

    Each Gram eigenvector ``w`` is mapped back as ``X w / ||X w||``. Gram
    eigenvalues below ``n * eps * lambda_max`` count as zero; if fewer than
    ``r`` remain, :class:`RankDeficientSampleError` is raised.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if r < 1 or r > min(n, d):
        raise ValueError(f"rank r={r} must lie in [1, min(n, d)={min(n, d)}]")
    if not np.all(np.isfinite(X)):
        raise ValueError("sampled matrix contains NaN or Inf")

    if d <= n:
        G = X.T @ X
        lam, W = scipy.linalg.eigh((G + G.T) / 2)
    else:
        G = X @ X.T
        lam, W = scipy.linalg.eigh((G + G.T) / 2)
    lam, W = lam[::-1], W[:, ::-1]
    lam_max = max(lam[0], 0.0)
    cutoff = n * EPS * lam_max
    found = int(np.count_nonzero(lam > cutoff)) if lam_max > 0 else 0
    if found < r:
        raise RankDeficientSampleError(r, found)

    lam = lam[:r]
    if d <= n:
        Q = (X @ W[:, :r]) / np.sqrt(lam)
    else:
        Q = W[:, :r].copy()
    # Gram mapping loses orthogonality like cond^2 * eps; one QR pass with
    # signs matched back to Q restores it without moving the span.
    Qr, R = np.linalg.qr(Q)
    Q = Qr * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    return TruncatedBasis(np.asfortranarray(Q), np.clip(lam, 0.0, None))


def full_svd(M) -> SvdResult:
    M = np.asarray(M, dtype=np.float64)
    U, s, Vt = scipy.linalg.svd(M, full_matrices=False)
    return SvdResult(U, s, Vt.T, 0.0, s)


def truncated_svd(M, r: int) -> SvdResult:
    """First ``r`` singular triplets plus ``sigma_{r+1}``."""
    M = np.asarray(M, dtype=np.float64)
    if not 1 <= r < min(M.shape):
        raise ValueError(f"rank r={r} must satisfy 1 <= r < min{M.shape}")
    U, s, Vt = scipy.linalg.svd(M, full_matrices=False)
    return SvdResult(U[:, :r], s[:r], Vt[:r].T, float(s[r]), s)


def _start_vector(m: int) -> np.ndarray:
    x = np.ones(m)
    x[0] += 1.0
    return x / np.linalg.norm(x)


def _power(apply, apply_t, x, tol, max_iters):
    quotients = []
    q_prev = None
    for k in range(1, max_iters + 1):
        y = apply(x)
        q = float(y @ y)
        quotients.append(q)
        if q_prev is not None and abs(q - q_prev) <= tol * q:
            return q, True, k, quotients
        z = apply_t(y)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return q, True, k, quotients
        x = z / nz
        q_prev = q
    return q, False, max_iters, quotients


def spectral_norm_diff(M, approx, tol: float = 1e-8, max_iters: int = 1000) -> PowerIterationResult:
    """``||M - Mhat||_2`` by power iteration on ``(M - Mhat)^T (M - Mhat)``.

    Matvecs are applied as ``M x - Mhat x`` without forming ``Mhat``.
    Convergence means successive Rayleigh quotients agree to ``tol``
    relative; otherwise the best estimate comes back with
    ``converged=False``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.shape != tuple(approx.shape):
        raise ValueError(f"shape mismatch: {M.shape} vs {approx.shape}")

    def apply(x):
        return M @ x - approx.matvec(x)

    def apply_t(y):
        return M.T @ y - approx.rmatvec(y)

    q, ok, its, quotients = _power(apply, apply_t, _start_vector(M.shape[1]), tol, max_iters)
    scale = np.linalg.norm(M)
    if np.sqrt(q) <= 1e-14 * scale:
        # start vector may sit in the null space; retry from a random one
        x = np.random.default_rng(0).standard_normal(M.shape[1])
        q2, ok2, its2, quotients2 = _power(apply, apply_t, x / np.linalg.norm(x), tol, max_iters)
        if q2 > q:
            q, ok, quotients = q2, ok2, quotients2
        its += its2
    return PowerIterationResult(float(np.sqrt(q)), ok, its, quotients)


def frobenius_norm_diff(M, approx, block: int = 512) -> float:
    """``||M - Mhat||_F``, forming ``Mhat`` one column block at a time."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape != tuple(approx.shape):
        raise ValueError(f"shape mismatch: {M.shape} vs {approx.shape}")
    total = 0.0
    for j0 in range(0, M.shape[1], block):
        j1 = min(j0 + block, M.shape[1])
        D = M[:, j0:j1] - approx.columns(j0, j1)
        total += float(np.einsum("ij,ij->", D, D))
    return float(np.sqrt(total))


def pseudoinverse(X, rcond: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values below ``rcond * sigma_max``
    are dropped (default ``rcond = max(n, m) * eps``)."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains NaN or Inf")
    if rcond is None:
        rcond = max(X.shape) * EPS
    U, s, Vt = scipy.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(X.shape[::-1])
    keep = s > rcond * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T
