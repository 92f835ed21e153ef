"""Periodic cubic spline interpolation of fields on arbitrary grids."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .curve import TWO_PI, PeriodicField
from .errors import GridError


class PeriodicSpline:
    """C² periodic cubic interpolant of samples (α_i, y_i) with period 2π.

    Calling ``s(x, nu)`` evaluates the ``nu``-th derivative at arbitrary
    real ``x`` (wrapped into the period).  :meth:`evaluate_all` returns the
    value and first two derivatives in a single pass, which is what the
    boundary-integral kernels need.
    """

    def __init__(self, alphas, values):
        alphas = np.asarray(alphas, dtype=float)
        values = np.asarray(values, dtype=float)
        if alphas.size < 4:
            raise GridError("periodic spline needs at least 4 nodes")
        if np.any(np.diff(alphas) <= 0.0) or alphas[-1] - alphas[0] >= TWO_PI:
            raise GridError("duplicate or unordered spline nodes")
        x = np.append(alphas, alphas[0] + TWO_PI)
        y = np.append(values, values[0])
        self._cs = CubicSpline(x, y, bc_type="periodic")
        self._x = x
        # coefficients in ascending powers of (x − x_i)
        self._c = self._cs.c[::-1].copy()
        self.x0 = x[0]

    def _locate(self, x):
        xw = self.x0 + np.remainder(np.asarray(x, dtype=float) - self.x0, TWO_PI)
        idx = np.searchsorted(self._x, xw, side="right") - 1
        idx = np.clip(idx, 0, self._x.size - 2)
        return idx, xw - self._x[idx]

    def __call__(self, x, nu: int = 0):
        idx, dx = self._locate(x)
        c0, c1, c2, c3 = self._c[:, idx]
        if nu == 0:
            return c0 + dx * (c1 + dx * (c2 + dx * c3))
        if nu == 1:
            return c1 + dx * (2.0 * c2 + 3.0 * dx * c3)
        if nu == 2:
            return 2.0 * c2 + 6.0 * dx * c3
        if nu == 3:
            return 6.0 * c3 + 0.0 * dx
        raise ValueError("derivative order must be 0..3")

    def evaluate_all(self, x):
        """(s, s', s'') at ``x``."""
        idx, dx = self._locate(x)
        c0, c1, c2, c3 = self._c[:, idx]
        return (
            c0 + dx * (c1 + dx * (c2 + dx * c3)),
            c1 + dx * (2.0 * c2 + 3.0 * dx * c3),
            2.0 * c2 + 6.0 * dx * c3,
        )

    def integral(self) -> float:
        """Integral over one full period."""
        return float(self._cs.integrate(self._x[0], self._x[-1]))


def spline_periodic(values: PeriodicField) -> PeriodicSpline:
    """Periodic cubic spline through the samples of ``values``."""
    return PeriodicSpline(values.grid.alphas, values.values)
