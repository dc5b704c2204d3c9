"""Shared fixtures and helpers."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from nscyl.kernel import KernelConstants, compute_kernel_constants
from nscyl.spectral import Grid

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def kernel_constants() -> KernelConstants:
    return compute_kernel_constants()


@pytest.fixture
def small_grid() -> Grid:
    return Grid(8.0, 64, 16)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_oscillating_hat(grid: Grid, rng: np.random.Generator, k2_max: int = 3,
                           k1_max: int = 6) -> np.ndarray:
    """Random band-limited spectrum with zero k2 = 0 column."""
    h = np.zeros(grid.spectral_shape, dtype=complex)
    i1 = np.abs(grid.index1)[:, None]
    i2 = grid.index2[None, :]
    band = (i1 <= k1_max) & (i2 >= 1) & (i2 <= k2_max)
    h[band] = rng.standard_normal(band.sum()) + 1j * rng.standard_normal(band.sum())
    return grid.fft(grid.ifft(h))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one summary line per acceptance criterion for the terminal report."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def log(number: int, ok: bool, detail: str) -> None:
        line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
