"""Seeded uniform sampling of columns, rows and entries, without replacement.

Every draw is a pure function of ``(shape, budget, seed)``. Columns, rows
and entries use independent substreams of the master seed, so each stage can
be reproduced on its own. Draws are also nested: with the same seed, the
sample for a smaller budget is a prefix of the sample for a larger one (for
entries this holds for every budget up to half the grid).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import ObservationSet, SampleSelection

__all__ = [
    "SamplerConfig",
    "substream",
    "sample_column_indices",
    "sample_row_indices",
    "sample_rows_cols",
    "sample_entry_indices",
    "sample_entries",
]

_COLS, _ROWS, _ENTRIES, _ENTRIES_DENSE = 0, 1, 2, 3


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    d: int
    omega_size: int

    def validate(self, n: int, m: int) -> None:
        if not 1 <= self.d <= min(n, m):
            raise ValueError(f"d={self.d} outside [1, {min(n, m)}]")
        if not 1 <= self.omega_size <= n * m:
            raise ValueError(f"omega_size={self.omega_size} outside [1, {n * m}]")


def substream(seed: int, key: int) -> np.random.Generator:
    """Generator for substream ``key`` of the 64-bit master ``seed``."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def sample_column_indices(m: int, d: int, seed: int) -> np.ndarray:
    if not 1 <= d <= m:
        raise ValueError(f"column budget d={d} outside [1, {m}]")
    return substream(seed, _COLS).permutation(m)[:d]


def sample_row_indices(n: int, d: int, seed: int) -> np.ndarray:
    if not 1 <= d <= n:
        raise ValueError(f"row budget d={d} outside [1, {n}]")
    return substream(seed, _ROWS).permutation(n)[:d]


def sample_rows_cols(M, d: int, seed: int, d_rows: int | None = None) -> SampleSelection:
    """Draw ``d`` columns and ``d_rows`` (default ``d``) rows of ``M``.

    Raises ``ValueError`` when a budget is out of range.
    """
    M = np.asarray(M, dtype=np.float64)
    n, m = M.shape
    d_rows = d if d_rows is None else d_rows
    if d_rows == d and not 1 <= d <= min(n, m):
        raise ValueError(f"d={d} outside [1, {min(n, m)}]")
    cols = sample_column_indices(m, d, seed)
    rows = sample_row_indices(n, d_rows, seed)
    return SampleSelection.from_matrix(M, cols, rows)


def _first_distinct(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    # First `count` distinct values of the stream floor(N * U_k) in order of
    # appearance. The stream itself does not depend on `count`.
    stream = np.empty(0, dtype=np.int64)
    while True:
        have = np.unique(stream).size
        need = count - have
        batch = int(need * N / (N - have) * 1.1) + 16
        draws = np.floor(rng.random(batch) * N).astype(np.int64)
        stream = np.concatenate([stream, np.minimum(draws, N - 1)])
        _, first = np.unique(stream, return_index=True)
        if first.size >= count:
            first.sort()
            return stream[first[:count]]


def sample_entry_indices(shape: tuple[int, int], count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``count`` distinct cells drawn uniformly from an ``n x m`` grid.

    Returns ``(rows, cols)``.
    """
    n, m = (int(s) for s in shape)
    N = n * m
    if not 1 <= count <= N:
        raise ValueError(f"entry count {count} outside [1, {N}]")
    if 2 * count <= N:
        flat = _first_distinct(N, count, substream(seed, _ENTRIES))
    else:
        keys = substream(seed, _ENTRIES_DENSE).random(N)
        flat = np.argsort(keys, kind="stable")[:count]
    return flat % n, flat // n


def sample_entries(M, count: int, seed: int) -> ObservationSet:
    M = np.asarray(M, dtype=np.float64)
    rows, cols = sample_entry_indices(M.shape, count, seed)
    return ObservationSet(rows, cols, M[rows, cols], M.shape)
