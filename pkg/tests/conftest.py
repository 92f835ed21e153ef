"""Shared helpers for the test suite."""

import numpy as np
import pytest

from muskat.curve import PeriodicField, PeriodicGrid


def random_trig(grid: PeriodicGrid, degree: int, rng, scale: float = 1.0) -> PeriodicField:
    """Real trigonometric polynomial with random coefficients up to ``degree``."""
    a = grid.alphas
    vals = scale * rng.normal() * np.ones_like(a)
    for k in range(1, degree + 1):
        vals = vals + scale * (rng.normal() * np.cos(k * a) + rng.normal() * np.sin(k * a)) / k**2
    return PeriodicField(grid, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
