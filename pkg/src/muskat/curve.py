"""Grids, periodic fields, interfaces and their geometric functionals.

All objects here are immutable after construction.  Fields on uniform grids
carry an exact trigonometric representation (via the FFT); fields on
nonuniform grids are values only and are differentiated through the
periodic cubic spline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArcChordViolation, GridError, GridTooCoarseError, UnsupportedGridError

TWO_PI = 2.0 * np.pi
DELTA_RHO_DEFAULT = 4.0 * np.pi
ARC_CHORD_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class PeriodicGrid:
    """Nodes of a 2π-periodic parametrisation, strictly increasing in [−π, π)."""

    alphas: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if a.ndim != 1 or a.size < 8:
            raise GridError(f"need at least 8 nodes, got {a.size}")
        if np.any(np.diff(a) <= 0.0):
            raise GridError("grid nodes must be strictly increasing")
        if a[0] < -np.pi or a[-1] >= np.pi:
            raise GridError("grid nodes must lie in [-pi, pi)")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @classmethod
    def uniform_grid(cls, n: int) -> "PeriodicGrid":
        return cls(-np.pi + TWO_PI * np.arange(n) / n, uniform=True)

    @property
    def n(self) -> int:
        return self.alphas.size

    def spacing(self) -> np.ndarray:
        """Cell widths h_i = α_{i+1} − α_i, wrapping the last cell across π."""
        return np.diff(np.append(self.alphas, self.alphas[0] + TWO_PI))

    def same_as(self, other: "PeriodicGrid") -> bool:
        return self is other or (self.n == other.n and np.array_equal(self.alphas, other.alphas))


def _wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _fft_coefficients(values: np.ndarray) -> np.ndarray:
    """A_k in numpy FFT order for f(α) = Σ A_k e^{ikα} sampled at α_j = −π + 2πj/n."""
    n = values.shape[-1]
    k = _wavenumbers(n)
    # e^{-ik(-π)} = (−1)^k
    return np.fft.fft(values, axis=-1) / n * np.where(k % 2 == 0, 1.0, -1.0)


def _from_fft_coefficients(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[-1]
    k = _wavenumbers(n)
    return np.fft.ifft(coeffs * n * np.where(k % 2 == 0, 1.0, -1.0), axis=-1).real


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Samples of a 2π-periodic function on ``grid``.

    ``spectral`` optionally stores the coefficients A_k, |k| ≤ N, ordered
    from k = −N to k = N.  It is only allowed on uniform grids.
    """

    grid: PeriodicGrid
    values: np.ndarray
    spectral: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.spectral is not None:
            if not self.grid.uniform:
                raise UnsupportedGridError("spectral coefficients need a uniform grid")
            s = np.array(self.spectral, dtype=complex)
            s.setflags(write=False)
            object.__setattr__(self, "spectral", s)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn: Callable) -> "PeriodicField":
        return cls(grid, fn(grid.alphas))

    @classmethod
    def from_coefficients(cls, grid: PeriodicGrid, coeffs: np.ndarray) -> "PeriodicField":
        """Build from A_k, k = −N..N (real-valued functions only)."""
        if not grid.uniform:
            raise UnsupportedGridError("spectral construction needs a uniform grid")
        coeffs = np.asarray(coeffs, dtype=complex)
        N = (coeffs.size - 1) // 2
        if 2 * N >= grid.n:
            raise GridError(f"{grid.n} nodes cannot represent modes up to |k| = {N}")
        full = np.zeros(grid.n, dtype=complex)
        k = np.arange(-N, N + 1)
        full[k % grid.n] = coeffs
        return cls(grid, _from_fft_coefficients(full), spectral=coeffs)

    @property
    def n(self) -> int:
        return self.grid.n

    def coefficients(self, N: Optional[int] = None) -> np.ndarray:
        """Fourier coefficients A_k for k = −N..N (default N = ⌊(n−1)/2⌋)."""
        if not self.grid.uniform:
            raise UnsupportedGridError("Fourier coefficients need a uniform grid")
        full = _fft_coefficients(self.values)
        n = self.n
        Nmax = (n - 1) // 2
        N = Nmax if N is None else N
        k = np.arange(-N, N + 1)
        out = np.zeros(k.size, dtype=complex)
        ok = np.abs(k) <= Nmax
        out[ok] = full[k[ok] % n]
        return out

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the interpolant at arbitrary points.

        Trigonometric interpolation on uniform grids (the Nyquist mode is
        split symmetrically), periodic cubic spline otherwise.
        """
        x = np.asarray(x, dtype=float)
        if not self.grid.uniform:
            from .spline import spline_periodic

            return spline_periodic(self)(x)
        n = self.n
        A = _fft_coefficients(self.values)
        k = _wavenumbers(n)
        if n % 2 == 0:
            A = A.copy()
            A[n // 2] *= 0.5
            k = np.append(k, n // 2)
            A = np.append(A, A[n // 2])
        phase = np.exp(1j * np.multiply.outer(x, k))
        return (phase @ A).real

    def with_values(self, values) -> "PeriodicField":
        return PeriodicField(self.grid, values)

    def __add__(self, other):
        if isinstance(other, PeriodicField):
            return PeriodicField(self.grid, self.values + other.values)
        return PeriodicField(self.grid, self.values + other)

    def __mul__(self, c):
        return PeriodicField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicField(self.grid, -self.values)

    def mean(self) -> float:
        """Mean over one period (exact integral of the interpolant)."""
        if self.grid.uniform:
            return float(np.mean(self.values))
        from .spline import spline_periodic

        return spline_periodic(self).integral() / TWO_PI


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Exact derivative of the trigonometric interpolant on a uniform grid."""
    n = values.shape[-1]
    k = _wavenumbers(n)
    if order % 2 == 1 and n % 2 == 0:
        k = k.copy()
        k[n // 2] = 0.0
    return np.fft.ifft(np.fft.fft(values, axis=-1) * (1j * k) ** order, axis=-1).real


def differentiate(fld: PeriodicField, order: int = 1) -> PeriodicField:
    """∂_α^order of a periodic field, sampled on the same grid."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if fld.grid.uniform:
        return PeriodicField(fld.grid, spectral_derivative(fld.values, order))
    if order == 2 and fld.n < 8:
        raise GridTooCoarseError("second derivative on a nonuniform grid needs n >= 8")
    from .spline import spline_periodic

    return PeriodicField(fld.grid, spline_periodic(fld)(fld.grid.alphas, nu=order))


@dataclass(frozen=True, eq=False)
class Curve:
    """Interface z(α) = (α + p(α), z₂(α)) with p and z₂ periodic."""

    z1_minus_alpha: PeriodicField
    z2: PeriodicField
    delta_rho: float = DELTA_RHO_DEFAULT

    def __post_init__(self):
        if not self.z1_minus_alpha.grid.same_as(self.z2.grid):
            raise GridError("curve components must share a grid")

    @property
    def grid(self) -> PeriodicGrid:
        return self.z1_minus_alpha.grid

    @property
    def n(self) -> int:
        return self.grid.n

    @classmethod
    def from_functions(cls, grid, p, z2, delta_rho=DELTA_RHO_DEFAULT) -> "Curve":
        return cls(PeriodicField.from_function(grid, p), PeriodicField.from_function(grid, z2), delta_rho)

    @classmethod
    def flat(cls, grid, delta_rho=DELTA_RHO_DEFAULT) -> "Curve":
        zero = PeriodicField(grid, np.zeros(grid.n))
        return cls(zero, zero, delta_rho)

    def z1(self) -> np.ndarray:
        return self.grid.alphas + self.z1_minus_alpha.values

    def dz1(self) -> np.ndarray:
        return 1.0 + differentiate(self.z1_minus_alpha).values

    def dz2(self) -> np.ndarray:
        return differentiate(self.z2).values

    def with_delta_rho(self, delta_rho: float) -> "Curve":
        return Curve(self.z1_minus_alpha, self.z2, delta_rho)


@dataclass(frozen=True, eq=False)
class GraphInterface:
    """Interface given as a graph (α, f(α)).  ``mean`` is the conserved mean height."""

    f: PeriodicField
    mean: float = field(default=np.nan)

    def __post_init__(self):
        if not np.all(np.isfinite(self.f.values)):
            raise ValueError("graph values must be finite")
        if np.isnan(self.mean):
            object.__setattr__(self, "mean", self.f.mean())

    @property
    def grid(self) -> PeriodicGrid:
        return self.f.grid

    @property
    def values(self) -> np.ndarray:
        return self.f.values

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn: Callable) -> "GraphInterface":
        return cls(PeriodicField.from_function(grid, fn))

    def to_curve(self, delta_rho: float = DELTA_RHO_DEFAULT) -> Curve:
        return Curve(PeriodicField(self.grid, np.zeros(self.grid.n)), self.f, delta_rho)


def arc_chord_constant(curve: Curve, floor: float = ARC_CHORD_FLOOR) -> float:
    """Discrete sup of the periodic arc-chord function F(z)(α, β).

    Off-diagonal pairs use ||β||² / (2(cosh Δz₂ − cos Δz₁)); the diagonal
    limit contributes 1/|∂_α z|² at every node.
    """
    a = curve.grid.alphas
    z1 = curve.z1()
    z2 = curve.z2.values
    speed2 = curve.dz1() ** 2 + curve.dz2() ** 2
    if np.any(speed2 < floor):
        i = int(np.argmin(speed2))
        raise ArcChordViolation(f"degenerate tangent at alpha={a[i]:.6g}", alpha=a[i], beta=0.0)
    best = float(np.max(1.0 / speed2))
    n = a.size
    chunk = max(1, 2**20 // n)
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        beta = a[sl, None] - a[None, :]
        beta = np.abs(np.remainder(beta + np.pi, TWO_PI) - np.pi)
        d1 = z1[sl, None] - z1[None, :]
        d2 = z2[sl, None] - z2[None, :]
        # 2(cosh d2 − cos d1) written without cancellation
        denom = 4.0 * (np.sinh(0.5 * d2) ** 2 + np.sin(0.5 * d1) ** 2)
        offdiag = beta > 0.0
        bad = offdiag & (denom < floor)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise ArcChordViolation(
                f"chord vanishes between alpha={a[start + i]:.6g} and alpha={a[j]:.6g}",
                alpha=a[start + i],
                beta=a[start + i] - a[j],
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(offdiag, beta**2 / np.where(offdiag, denom, 1.0), 0.0)
        best = max(best, float(ratio.max()))
    return best


def rayleigh_taylor_profile(curve: Curve) -> PeriodicField:
    """σ(α) = Δρ ∂_α z₁(α)."""
    return PeriodicField(curve.grid, curve.delta_rho * curve.dz1())


def vorticity_strength(curve: Curve) -> PeriodicField:
    """ω(α) = −Δρ ∂_α z₂(α)."""
    return PeriodicField(curve.grid, -curve.delta_rho * curve.dz2())


def min_slope(curve: Curve) -> tuple[float, float]:
    """(min ∂_α z₁ over nodes, α at which it is attained)."""
    s = curve.dz1()
    i = int(np.argmin(s))
    return float(s[i]), float(curve.grid.alphas[i])
