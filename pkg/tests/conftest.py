import numpy as np
import pytest
from hypothesis import settings

from partialcur.synth import haar_orthonormal

# fixed example generation so a run is reproducible from the source tree
settings.register_profile("reproducible", derandomize=True)
settings.load_profile("reproducible")

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    _ACCEPTANCE_LINES.append(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def orthonormal():
    def make(n, k, seed=0):
        return haar_orthonormal(n, k, np.random.default_rng(seed))

    return make


def dense_residual(M, U, Z, V):
    """Brute-force Mhat = U Z V^T, materialized."""
    return np.asarray(M) - U @ Z @ V.T


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
