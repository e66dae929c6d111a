"""Synthetic test matrices: Gaussian-factor low-rank matrices and
full-rank matrices with a prescribed (power-decay) spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SpectrumSpec", "gen_low_rank", "gen_skewed", "haar_orthonormal", "spectrum_values"]


@dataclass(frozen=True)
class SpectrumSpec:
    """Target singular values.

    ``power_decay``: ``sigma_i = i ** -decay_exponent`` over all ``min(n, m)``
    values. ``exact_rank``: the same decay truncated to ``r`` nonzero values.
    ``custom``: ``sigma`` as given. If ``gap_ratio`` is set, the values past
    index ``r`` are rescaled so that ``sigma_r / sigma_{r+1} == gap_ratio``.
    """

    kind: str = "power_decay"
    r: int = 10
    decay_exponent: float = 2.0
    gap_ratio: float | None = None
    sigma: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("exact_rank", "power_decay", "custom"):
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        if self.r < 1:
            raise ValueError("r must be positive")
        if self.gap_ratio is not None and self.gap_ratio < 1:
            raise ValueError("gap_ratio must be >= 1")
        if self.kind == "custom":
            if self.sigma is None:
                raise ValueError("custom spectrum needs sigma")
            s = np.asarray(self.sigma, dtype=np.float64)
            if np.any(s < 0) or np.any(np.diff(s) > 0):
                raise ValueError("custom sigma must be nonnegative and nonincreasing")
        elif self.decay_exponent < 0:
            raise ValueError("decay_exponent must be nonnegative")


def spectrum_values(k: int, spec: SpectrumSpec) -> np.ndarray:
    if spec.kind == "custom":
        s = np.asarray(spec.sigma, dtype=np.float64)
        if s.size != k:
            raise ValueError(f"custom sigma has {s.size} values, need {k}")
        s = s.copy()
    else:
        s = np.arange(1, k + 1, dtype=np.float64) ** -spec.decay_exponent
        if spec.kind == "exact_rank":
            s[spec.r:] = 0.0
    r = spec.r
    if spec.gap_ratio is not None and r < k and s[r] > 0:
        s[r:] *= (s[r - 1] / spec.gap_ratio) / s[r]
    return s


def haar_orthonormal(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n x k`` matrix with Haar-distributed orthonormal columns (QR of a
    Gaussian matrix, signs fixed by diag(R) > 0)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Q * np.sign(np.diag(R))


def gen_low_rank(n: int, m: int, r: int, seed: int) -> np.ndarray:
    """``M_L @ M_R`` with i.i.d. standard normal ``n x r`` and ``r x m`` factors."""
    if not 1 <= r <= min(n, m):
        raise ValueError(f"rank r={r} must lie in [1, {min(n, m)}]")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(11,)))
    ML = rng.standard_normal((n, r))
    MR = rng.standard_normal((r, m))
    return np.asfortranarray(ML @ MR)


def gen_skewed(n: int, m: int, spec: SpectrumSpec, seed: int) -> np.ndarray:
    """``U diag(sigma) V^T`` with Haar factors and ``sigma`` from ``spec``."""
    k = min(n, m)
    if spec.r > k:
        raise ValueError(f"spec.r={spec.r} exceeds min(n, m)={k}")
    s = spectrum_values(k, spec)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(12,)))
    U = haar_orthonormal(n, k, rng)
    V = haar_orthonormal(m, k, rng)
    return np.asfortranarray((U * s) @ V.T)
