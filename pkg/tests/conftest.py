import numpy as np
import pytest

from ghostcorr.lattice import TransverseGrid


@pytest.fixture
def grid64():
    return TransverseGrid(64, 4e-6, 702e-9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def direct_dft(values, grid):
    """O(N^2) reference transform, independent of numpy.fft."""
    out = np.empty(grid.n_points, dtype=complex)
    for k, qk in enumerate(grid.q):
        out[k] = np.sum(values * np.exp(-1j * qk * grid.x)) / np.sqrt(grid.n_points)
    return out


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record one acceptance line, echo it live, and fail the test if it did not pass."""

    def record(criterion, label, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {label} ({detail})"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
