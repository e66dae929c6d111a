"""Classical CUR baselines built on uniformly sampled columns ``C`` and rows ``R``.

* CUR-F: ``Z = C^+ M R^+`` (needs the whole matrix).
* CUR-E: ``Z = C^+ M_e R^+`` where ``M_e`` rescales the observed entries by
  ``n m / |Omega|`` and zero-fills the rest, an unbiased estimate of ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import ObservationSet
from .spectra import pseudoinverse

__all__ = ["CurBaselineResult", "cur_f", "cur_e", "unbiased_estimate"]


@dataclass(frozen=True)
class CurBaselineResult:
    """``Mhat = C @ Z @ R``; never materialized unless asked."""

    C: np.ndarray
    Z: np.ndarray
    R: np.ndarray
    method: str

    def __post_init__(self):
        if self.Z.shape != (self.C.shape[1], self.R.shape[0]):
            raise ValueError(f"inconsistent shapes C{self.C.shape} Z{self.Z.shape} R{self.R.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.C.shape[0], self.R.shape[1])

    def matvec(self, x):
        return self.C @ (self.Z @ (self.R @ x))

    def rmatvec(self, y):
        return self.R.T @ (self.Z.T @ (self.C.T @ y))

    def columns(self, j0: int, j1: int) -> np.ndarray:
        return (self.C @ self.Z) @ self.R[:, j0:j1]

    def to_dense(self) -> np.ndarray:
        return self.columns(0, self.shape[1])


def _sampled(M, col_idx, row_idx):
    M = np.asarray(M, dtype=np.float64)
    col_idx = np.asarray(col_idx, dtype=np.int64)
    row_idx = np.asarray(row_idx, dtype=np.int64)
    n, m = M.shape
    if col_idx.size == 0 or row_idx.size == 0:
        raise ValueError("need at least one sampled column and row")
    if col_idx.min() < 0 or col_idx.max() >= m or row_idx.min() < 0 or row_idx.max() >= n:
        raise IndexError("sampled index out of range")
    return M, M[:, col_idx], M[row_idx, :]


def cur_f(M, col_idx, row_idx) -> CurBaselineResult:
    M, C, R = _sampled(M, col_idx, row_idx)
    Z = pseudoinverse(C) @ (M @ pseudoinverse(R))
    return CurBaselineResult(C, Z, R, "cur-f")


def unbiased_estimate(obs: ObservationSet, shape=None) -> np.ndarray:
    """Dense ``M_e``: ``(n m / |Omega|) M_ij`` on observed cells, 0 elsewhere."""
    shape = obs.shape if shape is None else tuple(shape)
    if shape != obs.shape:
        raise ValueError(f"shape {shape} does not match observations {obs.shape}")
    if len(obs) == 0:
        raise ValueError("unbiased estimate needs at least one observation")
    n, m = shape
    Me = np.zeros(shape, order="F")
    Me[obs.rows, obs.cols] = (n * m / len(obs)) * obs.values
    return Me


def cur_e(obs: ObservationSet, col_idx, row_idx, A, B) -> CurBaselineResult:
    """CUR with the core fitted to ``M_e``.

    ``A`` holds the sampled columns (``n x d1``) and ``B`` the sampled rows
    stored as columns (``m x d2``), so ``C = A`` and ``R = B.T``.
    """
    C = np.asarray(A, dtype=np.float64)
    R = np.asarray(B, dtype=np.float64).T
    n, m = obs.shape
    if C.shape != (n, len(col_idx)) or R.shape != (len(row_idx), m):
        raise ValueError("sampled columns/rows inconsistent with the observation shape")
    Me = unbiased_estimate(obs)
    Z = pseudoinverse(C) @ (Me @ pseudoinverse(R))
    return CurBaselineResult(C, Z, R, "cur-e")
