"""Matrix and observation-mask types shared by the rest of the package.

Dense matrices are plain ``numpy.ndarray`` objects in Fortran (column-major)
order; :func:`as_dense` is the single place where that contract is enforced.
Sampled entries travel as an :class:`ObservationSet`, which carries the
observed values next to their indices so that solvers never need the full
matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_dense",
    "ObservationSet",
    "FactoredLowRank",
    "SampleSelection",
    "apply_mask",
    "residual_on_mask",
    "masked_predictions",
    "ORTHONORMAL_ATOL",
]

ORTHONORMAL_ATOL = 1e-10

def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def as_dense(M) -> np.ndarray:
    """Validate ``M`` as a finite real 2-D matrix; return a read-only
    column-major copy."""
    a = np.array(M, dtype=np.float64, order="F")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    return _frozen(a)


@dataclass(frozen=True)
class ObservationSet:
    """Observed entries ``(rows[k], cols[k], values[k])`` of an ``n x m`` matrix.

    Index pairs are distinct and in range; entry order is preserved exactly as
    given.
    """

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        n, m = (int(s) for s in self.shape)
        if n < 1 or m < 1:
            raise ValueError(f"invalid shape {self.shape}")
        rows = np.asarray(self.rows, dtype=np.int64).ravel().copy()
        cols = np.asarray(self.cols, dtype=np.int64).ravel().copy()
        values = np.asarray(self.values, dtype=np.float64).ravel().copy()
        if not (rows.size == cols.size == values.size):
            raise ValueError("rows, cols and values must have equal length")
        if rows.size > n * m:
            raise ValueError("more observations than matrix cells")
        _check_indices(rows, cols, n, m)
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values must be finite")
        flat = cols * n + rows
        if np.unique(flat).size != flat.size:
            raise ValueError("observation indices must be distinct")
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "cols", _frozen(cols))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "shape", (n, m))

    def __len__(self) -> int:
        return int(self.rows.size)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.rows, self.cols, self.values)]

    def permuted(self, perm) -> "ObservationSet":
        perm = np.asarray(perm)
        return ObservationSet(self.rows[perm], self.cols[perm], self.values[perm], self.shape)

    def scaled(self, alpha: float) -> "ObservationSet":
        return ObservationSet(self.rows, self.cols, alpha * self.values, self.shape)

    def to_dense(self) -> np.ndarray:
        """Zero-filled dense matrix with the observed values in place."""
        out = np.zeros(self.shape, order="F")
        out[self.rows, self.cols] = self.values
        return out


def _check_indices(rows, cols, n, m):
    bad = np.flatnonzero((rows < 0) | (rows >= n) | (cols < 0) | (cols >= m))
    if bad.size:
        k = bad[0]
        raise IndexError(f"index ({rows[k]}, {cols[k]}) out of range for shape ({n}, {m})")


@dataclass(frozen=True)
class FactoredLowRank:
    """Rank-``r`` approximation ``U_hat @ Z @ V_hat.T`` kept in factored form.

    ``U_hat`` (n x r) and ``V_hat`` (m x r) must have orthonormal columns.
    """

    U_hat: np.ndarray
    Z: np.ndarray
    V_hat: np.ndarray

    def __post_init__(self):
        U = np.array(self.U_hat, dtype=np.float64, order="F")
        V = np.array(self.V_hat, dtype=np.float64, order="F")
        Z = np.array(self.Z, dtype=np.float64)
        if U.ndim != 2 or V.ndim != 2 or Z.shape != (U.shape[1], V.shape[1]):
            raise ValueError(f"inconsistent factor shapes {U.shape}, {Z.shape}, {V.shape}")
        for name, Q in (("U_hat", U), ("V_hat", V)):
            dev = np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) if Q.shape[1] else 0.0
            if dev > ORTHONORMAL_ATOL:
                raise ValueError(f"{name} columns are not orthonormal (max deviation {dev:.2e})")
        object.__setattr__(self, "U_hat", _frozen(U))
        object.__setattr__(self, "V_hat", _frozen(V))
        object.__setattr__(self, "Z", _frozen(Z))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U_hat.shape[0], self.V_hat.shape[0])

    @property
    def rank(self) -> int:
        return self.Z.shape[0]

    def entries(self, rows, cols) -> np.ndarray:
        """Values of the approximation at ``(rows[k], cols[k])``, O(r^2) each."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return np.einsum("kr,kr->k", self.U_hat[rows] @ self.Z, self.V_hat[cols])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.U_hat @ (self.Z @ (self.V_hat.T @ x))

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        return self.V_hat @ (self.Z.T @ (self.U_hat.T @ y))

    def columns(self, j0: int, j1: int) -> np.ndarray:
        return (self.U_hat @ self.Z) @ self.V_hat[j0:j1].T

    def to_dense(self) -> np.ndarray:
        return self.columns(0, self.shape[1])


@dataclass(frozen=True)
class SampleSelection:
    """Sampled columns ``A = M[:, col_indices]`` and rows ``B = M[row_indices, :].T``."""

    col_indices: np.ndarray
    row_indices: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        ci = np.asarray(self.col_indices, dtype=np.int64).ravel().copy()
        ri = np.asarray(self.row_indices, dtype=np.int64).ravel().copy()
        A = np.array(self.A, dtype=np.float64, order="F")
        B = np.array(self.B, dtype=np.float64, order="F")
        if np.unique(ci).size != ci.size or np.unique(ri).size != ri.size:
            raise ValueError("sampled indices must be distinct")
        if A.ndim != 2 or B.ndim != 2 or A.shape[1] != ci.size or B.shape[1] != ri.size:
            raise ValueError("A/B shapes do not match the index lists")
        for name, val in (("col_indices", ci), ("row_indices", ri)):
            object.__setattr__(self, name, _frozen(val))
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.A.shape[0], self.B.shape[0])

    @classmethod
    def from_matrix(cls, M, col_indices, row_indices) -> "SampleSelection":
        M = np.asarray(M)
        ci = np.asarray(col_indices, dtype=np.int64)
        ri = np.asarray(row_indices, dtype=np.int64)
        n, m = M.shape
        if ci.size and (ci.min() < 0 or ci.max() >= m):
            raise IndexError(f"column index out of range for {m} columns")
        if ri.size and (ri.min() < 0 or ri.max() >= n):
            raise IndexError(f"row index out of range for {n} rows")
        return cls(ci, ri, M[:, ci], M[ri, :].T)


def apply_mask(M, omega) -> ObservationSet:
    """Restrict ``M`` to the index pairs in ``omega`` (an iterable of ``(i, j)``
    or a ``(rows, cols)`` pair of arrays)."""
    M = np.asarray(M, dtype=np.float64)
    if isinstance(omega, tuple) and len(omega) == 2 and np.ndim(omega[0]) == 1:
        rows, cols = (np.asarray(a, dtype=np.int64) for a in omega)
    else:
        pairs = np.asarray(list(omega), dtype=np.int64).reshape(-1, 2)
        rows, cols = pairs[:, 0], pairs[:, 1]
    n, m = M.shape
    _check_indices(rows, cols, n, m)
    return ObservationSet(rows, cols, M[rows, cols], (n, m))


def masked_predictions(obs: ObservationSet, approx: FactoredLowRank) -> np.ndarray:
    if obs.shape != approx.shape:
        raise ValueError(f"shape mismatch: observations {obs.shape}, approximation {approx.shape}")
    return approx.entries(obs.rows, obs.cols)


def residual_on_mask(obs: ObservationSet, approx: FactoredLowRank) -> float:
    """Half the squared residual ``1/2 sum (M_ij - Mhat_ij)^2`` over observed cells."""
    if len(obs) == 0:
        if obs.shape != approx.shape:
            raise ValueError("shape mismatch")
        return 0.0
    res = obs.values - masked_predictions(obs, approx)
    return 0.5 * float(res @ res)
