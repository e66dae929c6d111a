"""Experiment drivers: minimal-budget recovery sweeps and baseline comparisons.

Every trial is a pure function of ``(configuration, master seed)``; per-trial
seeds come from :func:`trial_seed`, so records reproduce bit for bit and
trials can run on a thread pool in any order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .baselines import cur_e, cur_f
from .curplus import CurPlusConfig, UnderdeterminedError, cur_plus
from .diagnostics import error_metrics, incoherence_mu, recovery_budgets
from .sampling import sample_entries, sample_rows_cols
from .spectra import RankDeficientSampleError, frobenius_norm_diff
from .synth import gen_low_rank

log = logging.getLogger(__name__)

__all__ = [
    "RECOVERY_THRESHOLD",
    "TRIALS_PER_POINT",
    "ExperimentRecord",
    "SweepResult",
    "CSV_COLUMNS",
    "trial_seed",
    "omega0",
    "recovery_error",
    "search_minimal",
    "sweep_minimal_budgets",
    "bench_baselines",
    "summarize",
    "records_to_csv",
    "records_to_json",
]

RECOVERY_THRESHOLD = 2e-4
TRIALS_PER_POINT = 10
METHODS = ("curplus", "cur-f", "cur-e")


@dataclass
class ExperimentRecord:
    n: int
    m: int
    r: int
    d: int
    d_rows: int
    omega_size: int
    alpha: float
    seed: int
    method: str
    ell_s: float | None
    ell_F: float | None
    rel_frobenius_to_M: float | None
    runtime_ms: float
    converged: bool
    caps_applied: bool
    omega_floored: bool = False
    policy: str = ""


CSV_COLUMNS = [f.name for f in fields(ExperimentRecord)]


@dataclass
class SweepResult:
    n: int
    r: int
    minimal_d: int | None
    minimal_omega: int | None
    trials_per_point: int = TRIALS_PER_POINT
    omega_for_d_search: int = 0
    d_for_omega_search: int | None = None
    d_evaluations: dict = field(default_factory=dict, repr=False)
    omega_evaluations: dict = field(default_factory=dict, repr=False)

    @property
    def found(self) -> bool:
        return self.minimal_d is not None and self.minimal_omega is not None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_evaluations"] = {str(k): v for k, v in self.d_evaluations.items()}
        out["omega_evaluations"] = {str(k): v for k, v in self.omega_evaluations.items()}
        return out


def trial_seed(seed: int, *keys: int) -> int:
    """64-bit seed derived from a master seed and integer keys."""
    lo, hi = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def omega0(M, r: int) -> tuple[int, bool]:
    """Entry budget ``n m r^2 / nnz(M)``, floored at ``7 r^2 (3 ln r)``.

    Returns the budget and whether the floor was applied.
    """
    M = np.asarray(M)
    n, m = M.shape
    nnz = max(int(np.count_nonzero(M)), 1)
    raw = math.ceil(n * m * r * r / nnz)
    floor = math.ceil(7 * r * r * 3 * math.log(r)) if r > 1 else raw
    value = min(max(raw, floor), n * m)
    return value, floor > raw


def recovery_error(M, r: int, d: int, omega_size: int, seed: int) -> float:
    """Relative Frobenius error of CUR+ on one draw; ``inf`` when the draw is
    rank-deficient or underdetermined."""
    sel = sample_rows_cols(M, d, seed)
    obs = sample_entries(M, omega_size, seed)
    try:
        approx, _ = cur_plus(sel, obs, CurPlusConfig(r, d, omega_size))
    except (RankDeficientSampleError, UnderdeterminedError, np.linalg.LinAlgError):
        return math.inf
    return frobenius_norm_diff(M, approx) / np.linalg.norm(M)


def search_minimal(predicate, lo: int, hi: int, cache: dict | None = None) -> int | None:
    """Smallest ``b`` in ``[lo, hi]`` with ``predicate(b)``, assuming monotonicity.

    Doubles from ``lo`` until a pass, then bisects. Returns ``None`` when even
    ``hi`` fails.
    """
    cache = {} if cache is None else cache

    def test(b):
        if b not in cache:
            cache[b] = bool(predicate(b))
        return cache[b]

    if lo > hi:
        return None
    fail, b = lo - 1, lo
    while not test(b):
        if b >= hi:
            return None
        fail, b = b, min(2 * b, hi)
    while b - fail > 1:
        mid = (fail + b) // 2
        if test(mid):
            b = mid
        else:
            fail = mid
    return b


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def sweep_minimal_budgets(
    n_list,
    r_list,
    seed: int,
    trials: int = TRIALS_PER_POINT,
    threshold: float = RECOVERY_THRESHOLD,
    threads: int = 1,
) -> list[SweepResult]:
    """Minimal ``d`` and ``|Omega|`` giving recovery in every trial.

    For each ``(n, r)`` the ``d`` search runs with a generous entry budget
    (the recovery budget for the largest trial incoherence, capped at
    ``n^2 / 2``); the ``|Omega|`` search then runs at twice the minimal ``d``.
    """
    results = []
    for n in n_list:
        for r in r_list:
            mats = [gen_low_rank(n, n, r, trial_seed(seed, n, r, t)) for t in range(trials)]
            draw_seeds = [trial_seed(seed, n, r, t, 1) for t in range(trials)]
            ceiling = n * n // 2
            mu = max(incoherence_mu(M, r) for M in mats)
            generous = min(max(recovery_budgets(mu, r)[1], 4 * r * r), ceiling)

            def passes(d, omega):
                def one(t):
                    return recovery_error(mats[t], r, d, omega, draw_seeds[t]) <= threshold

                if threads > 1:
                    return all(_map(one, range(trials), threads))
                return all(one(t) for t in range(trials))

            d_cache: dict = {}
            d_min = search_minimal(lambda d: passes(d, generous), r, n, d_cache)
            res = SweepResult(n, r, d_min, None, trials, generous, d_evaluations=d_cache)
            if d_min is not None:
                d_fix = min(2 * d_min, n)
                o_cache: dict = {}
                res.minimal_omega = search_minimal(lambda o: passes(d_fix, o), r * r, ceiling, o_cache)
                res.d_for_omega_search = d_fix
                res.omega_evaluations = o_cache
            log.info("sweep n=%d r=%d: minimal d=%s, minimal |Omega|=%s", n, r, res.minimal_d, res.minimal_omega)
            results.append(res)
    return results


def _run_methods(M, r, d1, d2, omega_size, seed, methods, spec_tol, spec_iters):
    n, m = M.shape
    sel = sample_rows_cols(M, d1, seed, d_rows=d2)
    obs = sample_entries(M, omega_size, seed)
    out = {}
    for method in methods:
        t0 = time.perf_counter()
        ok = True
        try:
            if method == "curplus":
                approx, rep = cur_plus(sel, obs, CurPlusConfig(r, d1, omega_size))
                ok = rep.converged
            elif method == "cur-f":
                approx = cur_f(M, sel.col_indices, sel.row_indices)
            elif method == "cur-e":
                approx = cur_e(obs, sel.col_indices, sel.row_indices, sel.A, sel.B)
            else:
                raise ValueError(f"unknown method {method!r}")
        except (RankDeficientSampleError, UnderdeterminedError) as exc:
            log.warning("%s failed (n=%d m=%d r=%d d=%d): %s", method, n, m, r, d1, exc)
            out[method] = (None, (time.perf_counter() - t0) * 1e3, False)
            continue
        elapsed = (time.perf_counter() - t0) * 1e3
        metrics = error_metrics(M, approx, r, tol=spec_tol, max_iters=spec_iters)
        out[method] = (metrics, elapsed, ok and metrics.spectral_converged)
    return out


def bench_baselines(
    M,
    r_list,
    alphas=(1, 2, 3, 4, 5),
    omega_policy: str = "fixed",
    seeds=range(TRIALS_PER_POINT),
    methods=METHODS,
    omega_multipliers=(1, 2, 3, 4, 5),
    fixed_alpha: float = 5,
    threads: int = 1,
    spectral_tol: float = 1e-8,
    spectral_max_iters: int = 1000,
) -> list[ExperimentRecord]:
    """CUR+, CUR-F and CUR-E on shared samples, one record per method and trial.

    ``d1 = alpha r`` columns and ``d2 = alpha d1`` rows, each capped at the
    matrix dimension. Entry policies: ``fixed`` (``|Omega| = Omega_0``),
    ``cubic`` (``Omega_0 alpha^3``) and ``vary`` (``k Omega_0`` for
    ``k`` in ``omega_multipliers`` at ``alpha = fixed_alpha``). Budgets beyond
    ``n m`` are capped; caps never abort a run.
    """
    M = np.asarray(M, dtype=np.float64)
    n, m = M.shape
    if omega_policy not in ("fixed", "cubic", "vary"):
        raise ValueError(f"unknown omega policy {omega_policy!r}")
    seeds = list(seeds)
    jobs = []
    for r in r_list:
        base, floored = omega0(M, r)
        if omega_policy == "vary":
            points = [(fixed_alpha, k * base) for k in omega_multipliers]
        elif omega_policy == "cubic":
            points = [(a, base * a ** 3) for a in alphas]
        else:
            points = [(a, base) for a in alphas]
        for alpha, omega in points:
            d1_raw = int(round(alpha * r))
            d2_raw = int(round(alpha * d1_raw))
            d1, d2 = min(d1_raw, m), min(d2_raw, n)
            omega_c = min(int(math.ceil(omega)), n * m)
            capped = (d1, d2, omega_c) != (d1_raw, d2_raw, int(math.ceil(omega)))
            for s in seeds:
                jobs.append((r, alpha, d1, d2, omega_c, s, capped, floored))

    def run(job):
        r, alpha, d1, d2, omega_c, s, capped, floored = job
        draw = trial_seed(s, r, d1, d2, omega_c)
        res = _run_methods(M, r, d1, d2, omega_c, draw, methods, spectral_tol, spectral_max_iters)
        recs = []
        for method in methods:
            metrics, ms, ok = res[method]
            recs.append(ExperimentRecord(
                n=n, m=m, r=r, d=d1, d_rows=d2, omega_size=omega_c, alpha=float(alpha),
                seed=int(s), method=method,
                ell_s=None if metrics is None else metrics.ell_s,
                ell_F=None if metrics is None else metrics.ell_F,
                rel_frobenius_to_M=None if metrics is None else metrics.rel_frobenius_to_M,
                runtime_ms=ms, converged=ok, caps_applied=capped, omega_floored=floored,
                policy=omega_policy,
            ))
        return recs

    return [rec for recs in _map(run, jobs, threads) for rec in recs]


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def summarize(records) -> list[ExperimentRecord]:
    """Mean over seeds for each configuration and method (``seed`` = number of
    trials averaged; ``converged`` = all trials converged)."""
    groups = defaultdict(list)
    for rec in records:
        key = (rec.n, rec.m, rec.r, rec.d, rec.d_rows, rec.omega_size, rec.alpha, rec.method, rec.policy)
        groups[key].append(rec)
    out = []
    for (n, m, r, d, d2, om, alpha, method, policy), recs in groups.items():
        out.append(ExperimentRecord(
            n=n, m=m, r=r, d=d, d_rows=d2, omega_size=om, alpha=alpha, seed=len(recs),
            method=method,
            ell_s=_mean(x.ell_s for x in recs),
            ell_F=_mean(x.ell_F for x in recs),
            rel_frobenius_to_M=_mean(x.rel_frobenius_to_M for x in recs),
            runtime_ms=_mean(x.runtime_ms for x in recs),
            converged=all(x.converged for x in recs),
            caps_applied=any(x.caps_applied for x in recs),
            omega_floored=any(x.omega_floored for x in recs),
            policy=policy,
        ))
    return out


def records_to_csv(records, stream=None) -> str:
    buf = io.StringIO() if stream is None else stream
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = asdict(rec)
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue() if stream is None else ""


def records_to_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=2)
