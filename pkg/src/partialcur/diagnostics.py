"""Incoherence measures, numerical rank, Hessian conditioning and error metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .curplus import normal_equations
from .matcore import ObservationSet
from .spectra import EPS, frobenius_norm_diff, full_svd, spectral_norm_diff, truncated_svd

__all__ = [
    "IncoherenceReport",
    "ErrorMetrics",
    "incoherence_mu",
    "incoherence_mu_hat",
    "numerical_rank",
    "incoherence_mu_eta",
    "incoherence_report",
    "auto_eta",
    "hessian_eigs",
    "hessian_min_eig",
    "error_metrics",
    "recovery_budgets",
]

# Relative slack on the [1, max(n, m)/r] incoherence bounds.
_BOUND_RTOL = 1e-10
# Relative-error denominators below this fraction of sigma_1 count as zero.
_DENOM_RTOL = 1e-14


@dataclass(frozen=True)
class IncoherenceReport:
    mu_r: float
    mu_hat_r: float | None
    mu_eta: float
    numerical_rank: float
    eta: float
    r: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ErrorMetrics:
    """Relative fields are ``None`` when ``M`` is (numerically) of rank <= r."""

    ell_s: float | None
    ell_F: float | None
    abs_spectral: float
    abs_frobenius: float
    rel_frobenius_to_M: float | None
    spectral_converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _max_row_mass(Q: np.ndarray) -> float:
    return float(np.max(np.einsum("ij,ij->i", Q, Q)))


def _scaled_incoherence(U: np.ndarray, V: np.ndarray) -> float:
    n, r = U.shape
    m = V.shape[0]
    mu = max(n / r * _max_row_mass(U), m / r * _max_row_mass(V))
    upper = max(n, m) / r
    if not (1.0 - _BOUND_RTOL <= mu <= upper * (1.0 + _BOUND_RTOL)):
        raise ArithmeticError(f"incoherence {mu} outside [1, {upper}]; bases not orthonormal?")
    return mu


def _numerical_rank_count(s: np.ndarray, shape) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > max(shape) * EPS * s[0]))


def incoherence_mu(M, r: int) -> float:
    """Largest scaled squared row norm of the top-``r`` singular vectors of ``M``."""
    M = np.asarray(M, dtype=np.float64)
    svd = full_svd(M)
    rank = _numerical_rank_count(svd.spectrum, M.shape)
    if not 1 <= r <= rank:
        raise ValueError(f"r={r} exceeds the numerical rank {rank} of M")
    return _scaled_incoherence(svd.U[:, :r], svd.V[:, :r])


def incoherence_mu_hat(U_hat, V_hat) -> float:
    """Same measure evaluated on estimated bases (orthonormal columns)."""
    U = getattr(U_hat, "Q", U_hat)
    V = getattr(V_hat, "Q", V_hat)
    return _scaled_incoherence(np.asarray(U, dtype=np.float64), np.asarray(V, dtype=np.float64))


def numerical_rank(sigma, eta: float, n: int, m: int) -> float:
    """Soft rank ``sum sigma_i^2 / (sigma_i^2 + m n eta)``.

    With ``eta = 0`` this counts the nonzero singular values.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    s2 = np.asarray(sigma, dtype=np.float64) ** 2
    den = s2 + m * n * eta
    ratios = np.divide(s2, den, out=np.zeros_like(s2), where=den > 0)
    return float(np.sum(ratios))


def auto_eta(sigma, r: int, n: int, m: int) -> float:
    """``sigma_r^2 / (m n)``."""
    return float(np.asarray(sigma)[r - 1] ** 2 / (m * n))


def incoherence_mu_eta(M, eta: float, *, normalized: bool = True) -> float:
    """Spectrum-weighted incoherence.

    Row ``i`` of ``U`` (and of ``V``) is weighted componentwise by
    ``sigma_j / sqrt(sigma_j^2 + m n eta)`` when ``normalized`` (the default);
    the squared row masses then sum to the numerical rank, which keeps the
    measure >= 1. ``normalized=False`` weights by ``sigma_j`` alone.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    M = np.asarray(M, dtype=np.float64)
    n, m = M.shape
    svd = full_svd(M)
    s2 = svd.spectrum ** 2
    w = s2 / (s2 + m * n * eta) if normalized else s2
    rk = numerical_rank(svd.spectrum, eta, n, m)
    if rk == 0.0:
        raise ValueError("numerical rank is zero (M = 0)")
    mass_u = np.max((svd.U ** 2) @ w)
    mass_v = np.max((svd.V ** 2) @ w)
    return float(max(n / rk * mass_u, m / rk * mass_v))


def incoherence_report(M, r: int, eta="auto", U_hat=None, V_hat=None) -> IncoherenceReport:
    M = np.asarray(M, dtype=np.float64)
    n, m = M.shape
    sigma = full_svd(M).spectrum
    eta = auto_eta(sigma, r, n, m) if eta == "auto" else float(eta)
    mu_hat = incoherence_mu_hat(U_hat, V_hat) if U_hat is not None and V_hat is not None else None
    return IncoherenceReport(
        mu_r=incoherence_mu(M, r),
        mu_hat_r=mu_hat,
        mu_eta=incoherence_mu_eta(M, eta),
        numerical_rank=numerical_rank(sigma, eta, n, m),
        eta=eta,
        r=r,
    )


def hessian_eigs(obs: ObservationSet, U_hat, V_hat) -> np.ndarray:
    """All eigenvalues (ascending) of the ``r^2 x r^2`` regression Hessian."""
    H, _ = normal_equations(obs, U_hat, V_hat)
    return scipy.linalg.eigvalsh(H)


def hessian_min_eig(obs: ObservationSet, U_hat, V_hat) -> float:
    return float(hessian_eigs(obs, U_hat, V_hat)[0])


def error_metrics(M, approx, r: int, tol: float = 1e-8, max_iters: int = 1000) -> ErrorMetrics:
    """Spectral and Frobenius errors of ``approx``, absolute and relative to
    the best rank-``r`` error."""
    M = np.asarray(M, dtype=np.float64)
    svd = truncated_svd(M, r)
    spec = spectral_norm_diff(M, approx, tol=tol, max_iters=max_iters)
    fro = frobenius_norm_diff(M, approx)
    sigma1 = float(svd.spectrum[0])
    floor = _DENOM_RTOL * sigma1

    def rel(num, den):
        return num / den if den > floor and den > 0.0 else None

    normM = float(np.sqrt(svd.spectrum @ svd.spectrum))
    return ErrorMetrics(
        ell_s=rel(spec.value, svd.sigma_next),
        ell_F=rel(fro, svd.tail_frobenius),
        abs_spectral=spec.value,
        abs_frobenius=fro,
        rel_frobenius_to_M=fro / normM if normM > 0 else None,
        spectral_converged=spec.converged,
    )


def recovery_budgets(mu: float, r: int, t: float | None = None) -> tuple[int, int]:
    """Column/row budget ``ceil(7 mu r (t + ln r))`` and entry budget
    ``ceil(7 mu^2 r^2 (t + 2 ln r))``; ``t`` defaults to ``ln r``."""
    t = math.log(r) if t is None else t
    d = math.ceil(7 * mu * r * (t + math.log(r)))
    omega = math.ceil(7 * mu * mu * r * r * (t + 2 * math.log(r)))
    return d, omega
