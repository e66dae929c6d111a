"""CUR+ : low-rank approximation from sampled columns, sampled rows and a
uniformly sampled subset of entries.

The column space estimate ``U_hat`` comes from the top-``r`` eigenvectors of
``A A^T`` (sampled columns), the row space estimate ``V_hat`` from ``B B^T``
(sampled rows). The ``r x r`` core ``Z`` is then fitted by least squares on
the observed entries only::

    min_Z  1/2 * sum_{(i,j) in Omega} (M_ij - u_i^T Z v_j)^2

with ``u_i``, ``v_j`` the ``i``-th row of ``U_hat`` and ``j``-th row of
``V_hat``. ``vec(Z)`` is row-major throughout, so entry ``(a, b)`` of ``Z``
sits at position ``a * r + b`` and each observation contributes the design
row ``kron(u_i, v_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .matcore import FactoredLowRank, ObservationSet, SampleSelection
from .spectra import RankDeficientSampleError, TruncatedBasis, top_r_left_eigvecs

__all__ = [
    "CurPlusConfig",
    "SolveReport",
    "UnderdeterminedError",
    "build_bases",
    "normal_equations",
    "objective",
    "gradient",
    "solve_z",
    "cur_plus",
    "DIRECT_MAX_R2",
    "SINGULAR_RTOL",
]

# Direct Hessian solves up to r = 50; CG above.
DIRECT_MAX_R2 = 2500
# lambda_min / lambda_max at or below this marks the Hessian as singular.
SINGULAR_RTOL = 1e-12


class UnderdeterminedError(ValueError):
    def __init__(self, n_obs: int, r: int, lambda_min: float | None):
        self.n_obs = n_obs
        self.r = r
        self.lambda_min = lambda_min
        est = "n/a" if lambda_min is None else f"{lambda_min:.3e}"
        super().__init__(
            f"underdetermined: |Omega|={n_obs} too small for r^2={r * r} "
            f"(Hessian lambda_min estimate {est}); observe more entries or set ridge > 0"
        )


@dataclass(frozen=True)
class CurPlusConfig:
    r: int
    d: int
    omega_size: int
    solver: str = "auto"
    cg_tol: float = 1e-10
    cg_max_iters: int | None = None
    ridge: float = 0.0

    def __post_init__(self):
        if self.r < 1 or self.r > self.d:
            raise ValueError(f"need 1 <= r <= d, got r={self.r}, d={self.d}")
        if self.omega_size < 1:
            raise ValueError("omega_size must be at least 1")
        if self.solver not in ("auto", "direct", "cg"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")

    @property
    def max_cg_iters(self) -> int:
        return 10 * self.r * self.r if self.cg_max_iters is None else self.cg_max_iters

    def resolved_solver(self) -> str:
        if self.solver != "auto":
            return self.solver
        return "direct" if self.r * self.r <= DIRECT_MAX_R2 else "cg"


@dataclass
class SolveReport:
    solver: str
    iterations: int
    final_residual: float
    objective_value: float
    hessian_min_eig: float | None = None
    converged: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _as_basis(B) -> np.ndarray:
    return B.Q if isinstance(B, TruncatedBasis) else np.asarray(B, dtype=np.float64)


def build_bases(sel: SampleSelection, r: int) -> tuple[TruncatedBasis, TruncatedBasis]:
    """Top-``r`` eigenbases of ``A A^T`` and ``B B^T``."""
    out = []
    for name, X in (("columns", sel.A), ("rows", sel.B)):
        if r > X.shape[1]:
            raise RankDeficientSampleError(
                r, X.shape[1], f"only {X.shape[1]} sampled {name} for rank {r}; increase d"
            )
        try:
            out.append(top_r_left_eigvecs(X, r))
        except RankDeficientSampleError as exc:
            raise RankDeficientSampleError(
                r, exc.found, f"{exc} among sampled {name}; increase d"
            ) from exc
    return out[0], out[1]


def normal_equations(obs: ObservationSet, U_hat, V_hat) -> tuple[np.ndarray, np.ndarray]:
    """Hessian ``H = sum vec(u_i v_j^T) vec(u_i v_j^T)^T`` and right-hand side
    ``sum M_ij vec(u_i v_j^T)`` over the observed entries.

    Entries are accumulated row by row: with ``G_i = sum_{j in Omega_i} v_j v_j^T``
    the Hessian is ``sum_i (u_i u_i^T) kron G_i``, costing
    ``O(|Omega| r^2 + n r^4)`` instead of ``O(|Omega| r^4)``.
    """
    U, V = _as_basis(U_hat), _as_basis(V_hat)
    _check_shapes(obs, U, V)
    r = U.shape[1]
    order = np.argsort(obs.rows, kind="stable")
    rows = obs.rows[order]
    Vs = V[obs.cols[order]]
    uniq, starts = np.unique(rows, return_index=True)
    stops = np.append(starts[1:], rows.size)
    G = np.empty((uniq.size, r * r))
    for k, (a, b) in enumerate(zip(starts, stops)):
        Vi = Vs[a:b]
        G[k] = (Vi.T @ Vi).ravel()
    Uu = U[uniq]
    Pu = (Uu[:, :, None] * Uu[:, None, :]).reshape(uniq.size, r * r)
    # (Pu^T G)[(a,c),(b,d)] = sum_i u_ia u_ic G_i[b,d]  ->  reorder to [(a,b),(c,d)]
    H = (Pu.T @ G).reshape(r, r, r, r).transpose(0, 2, 1, 3).reshape(r * r, r * r)
    Uo = U[obs.rows]
    rhs = (Uo.T @ (obs.values[:, None] * V[obs.cols])).ravel()
    return (H + H.T) / 2, rhs


def _check_shapes(obs, U, V):
    if obs.shape != (U.shape[0], V.shape[0]):
        raise ValueError(f"observation shape {obs.shape} does not match bases "
                         f"({U.shape[0]}, {V.shape[0]})")


def objective(Z, obs: ObservationSet, U_hat, V_hat) -> float:
    U, V = _as_basis(U_hat), _as_basis(V_hat)
    _check_shapes(obs, U, V)
    pred = np.einsum("kr,kr->k", U[obs.rows] @ Z, V[obs.cols])
    res = obs.values - pred
    return 0.5 * float(res @ res)


def gradient(Z, obs: ObservationSet, U_hat, V_hat) -> np.ndarray:
    """``U_hat^T [R_Omega(U_hat Z V_hat^T - M)] V_hat``."""
    U, V = _as_basis(U_hat), _as_basis(V_hat)
    _check_shapes(obs, U, V)
    Uo, Vo = U[obs.rows], V[obs.cols]
    res = np.einsum("kr,kr->k", Uo @ Z, Vo) - obs.values
    return Uo.T @ (res[:, None] * Vo)


def _solve_direct(obs, U, V, config, r):
    H, rhs = normal_equations(obs, U, V)
    lam = scipy.linalg.eigvalsh(H)
    lam_min, lam_max = float(lam[0]), float(lam[-1])
    if config.ridge == 0.0 and (lam_max <= 0.0 or lam_min <= SINGULAR_RTOL * lam_max):
        raise UnderdeterminedError(len(obs), r, lam_min)
    A = H + config.ridge * np.eye(H.shape[0])
    z = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), rhs)
    nrhs = np.linalg.norm(rhs)
    resid = float(np.linalg.norm(A @ z - rhs) / nrhs) if nrhs > 0 else 0.0
    return z.reshape(r, r), 1, resid, lam_min, True


def _solve_cg(obs, U, V, config, r):
    Uo, Vo = U[obs.rows], V[obs.cols]
    ridge = config.ridge

    def op(Z):
        p = np.einsum("kr,kr->k", Uo @ Z, Vo)
        return Uo.T @ (p[:, None] * Vo) + ridge * Z

    b = Uo.T @ (obs.values[:, None] * Vo)
    nb = np.linalg.norm(b)
    Z = np.zeros((r, r))
    if nb == 0.0:
        return Z, 0, 0.0, None, True
    res = b.copy()
    p = res.copy()
    rr = float(np.vdot(res, res))
    its = 0
    converged = False
    for its in range(1, config.max_cg_iters + 1):
        Ap = op(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0.0:
            break
        step = rr / pAp
        Z += step * p
        res -= step * Ap
        rr_new = float(np.vdot(res, res))
        if np.sqrt(rr_new) <= config.cg_tol * nb:
            converged = True
            rr = rr_new
            break
        p = res + (rr_new / rr) * p
        rr = rr_new
    # report the true residual, not the recurrence
    resid = float(np.linalg.norm(op(Z) - b) / nb)
    return Z, its, resid, None, converged


def solve_z(obs: ObservationSet, U_hat, V_hat, config: CurPlusConfig) -> tuple[np.ndarray, SolveReport]:
    """Fit the ``r x r`` core on the observed entries.

    Raises :class:`UnderdeterminedError` when the Hessian is numerically
    singular (always the case for ``|Omega| < r^2``) and no ridge is set.
    """
    U, V = _as_basis(U_hat), _as_basis(V_hat)
    _check_shapes(obs, U, V)
    r = U.shape[1]
    if V.shape[1] != r:
        raise ValueError("U_hat and V_hat must have the same number of columns")
    if len(obs) == 0:
        raise ValueError("at least one observed entry is required")
    if config.ridge == 0.0 and len(obs) < r * r:
        raise UnderdeterminedError(len(obs), r, 0.0)

    solver = config.resolved_solver()
    if solver == "direct":
        Z, its, resid, lam_min, ok = _solve_direct(obs, U, V, config, r)
    else:
        Z, its, resid, lam_min, ok = _solve_cg(obs, U, V, config, r)
    report = SolveReport(
        solver=solver,
        iterations=its,
        final_residual=resid,
        objective_value=objective(Z, obs, U, V),
        hessian_min_eig=lam_min,
        converged=ok,
    )
    return Z, report


def cur_plus(sel: SampleSelection, obs: ObservationSet, config: CurPlusConfig) -> tuple[FactoredLowRank, SolveReport]:
    """Run CUR+ on sampled columns/rows ``sel`` and observed entries ``obs``."""
    if sel.shape != obs.shape:
        raise ValueError(f"selection shape {sel.shape} and observation shape {obs.shape} differ")
    r = config.r
    if not (sel.A.any() or sel.B.any() or obs.values.any()):
        # Everything seen is zero: Mhat = 0 is exact for any bases.
        n, m = sel.shape
        U = np.eye(n, r)
        V = np.eye(m, r)
        report = SolveReport(config.resolved_solver(), 0, 0.0, 0.0, None, True)
        return FactoredLowRank(U, np.zeros((r, r)), V), report
    Ub, Vb = build_bases(sel, r)
    Z, report = solve_z(obs, Ub, Vb, config)
    return FactoredLowRank(Ub.Q, Z, Vb.Q), report
