"""Reading and writing matrices and observation sets.

Dense matrices: Matrix Market ``array`` format or headerless CSV (one matrix
row per line). Observation sets: Matrix Market ``coordinate`` format, 1-based
on disk and 0-based in memory; entry order and explicit zeros survive a round
trip.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .matcore import ObservationSet, as_dense

# 17 significant digits round-trips float64 exactly.
_PRECISION = 17


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        data = scipy.io.mmread(path)
        if scipy.sparse.issparse(data):
            data = data.toarray()
    return as_dense(data)


def write_matrix(path, M) -> None:
    path = Path(path)
    M = np.asarray(M, dtype=np.float64)
    if path.suffix.lower() == ".csv":
        np.savetxt(path, M, delimiter=",", fmt="%.17g")
    else:
        scipy.io.mmwrite(path, M, precision=_PRECISION)
        _normalize_mtx_name(path)


def read_observations(path) -> ObservationSet:
    coo = scipy.io.mmread(Path(path))
    if not scipy.sparse.issparse(coo):
        raise ValueError(f"{path}: expected Matrix Market coordinate format")
    coo = scipy.sparse.coo_matrix(coo)
    return ObservationSet(coo.row, coo.col, coo.data, coo.shape)


def write_observations(path, obs: ObservationSet) -> None:
    path = Path(path)
    coo = scipy.sparse.coo_matrix((obs.values, (obs.rows, obs.cols)), shape=obs.shape)
    scipy.io.mmwrite(path, coo, precision=_PRECISION)
    _normalize_mtx_name(path)


def _normalize_mtx_name(path: Path) -> None:
    # mmwrite appends ".mtx" when the target has no such suffix
    if path.suffix != ".mtx":
        produced = path.with_name(path.name + ".mtx")
        if produced.exists():
            produced.replace(path)


def write_indices_json(path, **index_sets) -> None:
    """Dump named index arrays (e.g. ``col_indices=...``) as JSON lists for audit."""
    payload = {k: np.asarray(v).tolist() for k, v in index_sets.items()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
