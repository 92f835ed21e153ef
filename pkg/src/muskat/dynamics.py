"""Velocity (right-hand side) assembly for the interface evolution problems.

Periodic kernels come in two discretisations, selected by
``QuadratureSpec.method``:

* ``"grid"``: trapezoid rule over the nodes of a uniform grid, spectral
  derivatives, and the analytic β → 0 limit on the diagonal.  Spectrally
  accurate while the integrand is well resolved by the grid.
* ``"adaptive"``: periodic cubic spline interpolation of the interface and
  adaptive Gauss-Lobatto quadrature in β for every node, with the β = 0
  neighbourhood handled by the local model of :func:`pv_integral`.  Works on
  nonuniform grids and resolves near-singular cross-interface kernels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curve import (
    DELTA_RHO_DEFAULT,
    TWO_PI,
    Curve,
    GraphInterface,
    PeriodicField,
    spectral_derivative,
)
from .errors import GridError, NearTouchingError, NearTouchingWarning, TruncationWarning, UseReducidaError
from . import _kernels
from .quadrature import _W_KRONROD, _W_LOBATTO, DEFAULT_SPEC, QuadratureSpec, pv_integral, source_panel_quadrature
from .spline import PeriodicSpline

NEAR_TOUCH_WARNING = 1e-3
KERNEL_FLOOR = 1e-14
_CHUNK = 2**21


@dataclass(frozen=True, eq=False)
class TwoPhaseState:
    """Two graphs f (upper) and g (lower) on a shared grid.

    ``rho_bar_1`` and ``rho_bar_2`` are (ρ_{j+1} − ρ_j)/(4π).
    """

    f: GraphInterface
    g: GraphInterface
    rho_bar_1: float
    rho_bar_2: float

    def __post_init__(self):
        if not self.f.grid.same_as(self.g.grid):
            raise GridError("f and g must share a grid")
        if np.any(self.f.values <= self.g.values):
            i = int(np.argmin(self.f.values - self.g.values))
            raise NearTouchingError(
                f"upper interface not above lower one at alpha={self.f.grid.alphas[i]:.6g}",
                float(self.f.values[i] - self.g.values[i]),
            )

    @property
    def grid(self):
        return self.f.grid

    def min_separation(self) -> float:
        return float(np.min(self.f.values - self.g.values))


def _wrap(x):
    return np.remainder(x + np.pi, TWO_PI) - np.pi


def _graph_data(u: GraphInterface, method: str):
    """Node values and first two derivatives, plus an interpolant."""
    if method == "grid":
        if not u.grid.uniform:
            raise GridError("grid quadrature needs a uniform grid")
        v = u.values
        return v, spectral_derivative(v, 1), spectral_derivative(v, 2), None
    s = PeriodicSpline(u.grid.alphas, u.values)
    v, d1, d2 = s.evaluate_all(u.grid.alphas)
    return u.values, d1, d2, s


def _check_separation(u: GraphInterface, v: GraphInterface, sv) -> float:
    if u.grid.same_as(v.grid):
        gap = np.abs(u.values - v.values)
    else:
        gap = np.abs(u.values - sv(u.grid.alphas))
    gmin = float(gap.min())
    if np.tanh(0.5 * gmin) ** 2 < KERNEL_FLOOR:
        raise NearTouchingError(f"interfaces touch (min separation {gmin:.3g})", gmin)
    if gmin < NEAR_TOUCH_WARNING:
        warnings.warn(f"interfaces within {gmin:.3g} of each other", NearTouchingWarning, stacklevel=3)
    return gmin


def _interaction_kernel(du, dv, beta, diff):
    t = np.tan(0.5 * beta)
    s = np.tanh(0.5 * diff)
    return (du - dv) * t * (1.0 - s * s) / (t * t + s * s)


def interaction_rhs(u: GraphInterface, v: GraphInterface, spec: QuadratureSpec = DEFAULT_SPEC) -> PeriodicField:
    """I[u, v](α) at the nodes of u.

    I[u,v](α) = PV∫ (u'(α) − v'(α−β)) tan(β/2)(1 − tanh²(Δ/2)) / (tan²(β/2) + tanh²(Δ/2)) dβ,
    Δ = u(α) − v(α−β).  When u and v are the same interface the β → 0 limit
    is the removable value 2u''/(1 + u'²).
    """
    self_term = u is v or (u.grid.same_as(v.grid) and np.array_equal(u.values, v.values))
    ua, du, d2u, su = _graph_data(u, spec.method)
    if self_term:
        va, dv, sv = ua, du, su
    else:
        va, dv, _, sv = _graph_data(v, spec.method)
        if spec.method == "grid" and not u.grid.same_as(v.grid):
            raise GridError("grid quadrature needs u and v on the same grid")
        gmin = _check_separation(u, v, sv)

    alphas = u.grid.alphas
    n = alphas.size
    if spec.method == "grid":
        out = np.empty(n)
        rows = max(1, _CHUNK // n)
        for start in range(0, n, rows):
            i = np.arange(start, min(n, start + rows))
            beta = _wrap(alphas[i, None] - alphas[None, :])
            with np.errstate(divide="ignore", invalid="ignore"):
                K = _interaction_kernel(du[i, None], dv[None, :], beta, ua[i, None] - va[None, :])
            if self_term:
                K[np.arange(i.size), i] = 2.0 * d2u[i] / (1.0 + du[i] ** 2)
            out[i] = K.sum(axis=1)
        return PeriodicField(u.grid, out * TWO_PI / n)

    def source(x):
        vx, dvx, _ = sv.evaluate_all(x)
        return vx, dvx

    def kernel(i, x, src):
        return _interaction_kernel(du[i], src[1], alphas[i] - x, ua[i] - src[0])

    diagonal = (2.0 * d2u / (1.0 + du**2))[None, :] if self_term else None

    def first_pass(xb, src, half):
        diag = diagonal[0] if self_term else np.empty(0)
        sa, ca = _kernels.half_angles(alphas)
        shu, chu = _kernels.half_hyperbolic(ua)
        sx, cx = _kernels.half_angles(xb)
        shv, chv = _kernels.half_hyperbolic(src[0])
        return _kernels.interaction_panels(
            sa, ca, shu, chu, du, sx, cx, shv, chv, src[1], half, _W_KRONROD, _W_LOBATTO, diag
        )

    value, _ = source_panel_quadrature(
        kernel, alphas, v.grid.alphas, source, spec, diagonal=diagonal, first_pass=first_pass
    )
    value = value[0]
    return PeriodicField(u.grid, value)


def two_phase_rhs(state: TwoPhaseState, spec: QuadratureSpec = DEFAULT_SPEC):
    """(f_t, g_t) for two interfaces separating three fluids.

    f_t = ρ̄₁ I[f,f] + ρ̄₂ I[f,g],   g_t = ρ̄₂ I[g,g] + ρ̄₁ I[g,f].
    Terms with a zero coefficient are skipped.
    """
    f, g = state.f, state.g
    r1, r2 = state.rho_bar_1, state.rho_bar_2
    ft = np.zeros(f.grid.n)
    gt = np.zeros(g.grid.n)
    if r1 != 0.0:
        ft += r1 * interaction_rhs(f, f, spec).values
        gt += r1 * interaction_rhs(g, f, spec).values
    if r2 != 0.0:
        ft += r2 * interaction_rhs(f, g, spec).values
        gt += r2 * interaction_rhs(g, g, spec).values
    return PeriodicField(f.grid, ft), PeriodicField(g.grid, gt)


def _curve_node_data(curve: Curve, method: str):
    p, z2 = curve.z1_minus_alpha.values, curve.z2.values
    if method == "grid":
        if not curve.grid.uniform:
            raise GridError("grid quadrature needs a uniform grid")
        dp, d2p = spectral_derivative(p, 1), spectral_derivative(p, 2)
        dz2, d2z2 = spectral_derivative(z2, 1), spectral_derivative(z2, 2)
        return p, z2, 1.0 + dp, dz2, d2p, d2z2, None
    sp = PeriodicSpline(curve.grid.alphas, p)
    s2 = PeriodicSpline(curve.grid.alphas, z2)
    _, dp, d2p = sp.evaluate_all(curve.grid.alphas)
    _, dz2, d2z2 = s2.evaluate_all(curve.grid.alphas)
    return p, z2, 1.0 + dp, dz2, d2p, d2z2, (sp, s2)


def _contour_kernel(dz1_a, dz2_a, d1, d2, dz1_b, dz2_b):
    """Both components of sin(Δz₁)(∂z(α) − ∂z(α−β)) / (cosh Δz₂ − cos Δz₁)."""
    denom = 2.0 * (np.sinh(0.5 * d2) ** 2 + np.sin(0.5 * d1) ** 2)
    w = np.sin(d1) / denom
    return w * (dz1_a - dz1_b), w * (dz2_a - dz2_b)


def contour_rhs_periodic(curve: Curve, spec: QuadratureSpec = DEFAULT_SPEC):
    """(z₁_t, z₂_t) for a 2π-periodic contour.

    z_t(α) = Δρ/(4π) ∫ sin(Δz₁)(∂z(α) − ∂z(α−β)) / (cosh Δz₂ − cos Δz₁) dβ,
    Δz = z(α) − z(α−β).  The β → 0 limit is 2 ∂z₁ ∂²z / |∂z|².
    """
    p, z2, dz1, dz2, d2z1, d2z2, splines = _curve_node_data(curve, spec.method)
    alphas = curve.grid.alphas
    n = alphas.size
    pref = curve.delta_rho / (4.0 * np.pi)
    speed2 = dz1**2 + dz2**2
    if spec.method == "grid":
        out1 = np.empty(n)
        out2 = np.empty(n)
        rows = max(1, _CHUNK // n)
        for start in range(0, n, rows):
            i = np.arange(start, min(n, start + rows))
            beta = _wrap(alphas[i, None] - alphas[None, :])
            d1 = beta + p[i, None] - p[None, :]
            d2 = z2[i, None] - z2[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                K1, K2 = _contour_kernel(dz1[i, None], dz2[i, None], d1, d2, dz1[None, :], dz2[None, :])
            diag = (np.arange(i.size), i)
            K1[diag] = 2.0 * dz1[i] * d2z1[i] / speed2[i]
            K2[diag] = 2.0 * dz1[i] * d2z2[i] / speed2[i]
            out1[i] = K1.sum(axis=1)
            out2[i] = K2.sum(axis=1)
        w = pref * TWO_PI / n
        return PeriodicField(curve.grid, out1 * w), PeriodicField(curve.grid, out2 * w)

    sp, s2 = splines

    def source(x):
        px, dpx, _ = sp.evaluate_all(x)
        z2x, dz2x, _ = s2.evaluate_all(x)
        return px, dpx, z2x, dz2x

    def kernel(i, x, src):
        px, dpx, z2x, dz2x = src
        d1 = alphas[i] - x + p[i] - px
        return np.stack(_contour_kernel(dz1[i], dz2[i], d1, z2[i] - z2x, 1.0 + dpx, dz2x))

    diagonal = np.stack([2.0 * dz1 * d2z1 / speed2, 2.0 * dz1 * d2z2 / speed2])

    def first_pass(xb, src, half):
        s1, c1 = _kernels.half_angles(alphas + p)
        sh2, ch2 = _kernels.half_hyperbolic(z2)
        sx, cx = _kernels.half_angles(xb + src[0])
        shx, chx = _kernels.half_hyperbolic(src[2])
        return _kernels.contour_panels(
            s1, c1, sh2, ch2, dz1, dz2, sx, cx, shx, chx, 1.0 + src[1], src[3], half, _W_KRONROD, _W_LOBATTO, diagonal
        )

    value, _ = source_panel_quadrature(
        kernel, alphas, alphas, source, spec, diagonal=diagonal, first_pass=first_pass
    )
    return PeriodicField(curve.grid, pref * value[0]), PeriodicField(curve.grid, pref * value[1])


def curve_evaluator(curve: Curve) -> Callable:
    """x ↦ (z₁, z₂, ∂z₁, ∂z₂, ∂²z₁, ∂²z₂) at arbitrary parameter values.

    Uses the trigonometric interpolant on uniform grids and the periodic
    spline otherwise.
    """
    alphas = curve.grid.alphas
    if curve.grid.uniform:
        from .curve import _fft_coefficients, _wavenumbers

        n = curve.n
        k = _wavenumbers(n).astype(float)
        Ap = _fft_coefficients(curve.z1_minus_alpha.values)
        A2 = _fft_coefficients(curve.z2.values)
        if n % 2 == 0:
            Ap, A2 = Ap.copy(), A2.copy()
            Ap[n // 2] *= 0.5
            A2[n // 2] *= 0.5
            k = np.append(k, n / 2)
            Ap = np.append(Ap, Ap[n // 2])
            A2 = np.append(A2, A2[n // 2])
        coeffs = np.stack([Ap, 1j * k * Ap, -(k**2) * Ap, A2, 1j * k * A2, -(k**2) * A2], axis=1)

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            vals = (np.exp(1j * np.multiply.outer(x, k)) @ coeffs).real
            p, dp, d2p, z2, dz2, d2z2 = np.moveaxis(vals, -1, 0)
            return x + p, z2, 1.0 + dp, dz2, d2p, d2z2

        return evaluate

    sp = PeriodicSpline(alphas, curve.z1_minus_alpha.values)
    s2 = PeriodicSpline(alphas, curve.z2.values)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        p, dp, d2p = sp.evaluate_all(x)
        z2, dz2, d2z2 = s2.evaluate_all(x)
        return x + p, z2, 1.0 + dp, dz2, d2p, d2z2

    return evaluate


def contour_velocity_at(curve: Curve, alphas, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Contour velocity (2, m) at arbitrary parameter values ``alphas``."""
    ev = curve_evaluator(curve)
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    z1a, z2a, dz1a, dz2a, _, _ = ev(a)

    def integrand(beta):
        z1b, z2b, dz1b, dz2b, _, _ = ev(a[:, None] - beta[None, :])
        K1, K2 = _contour_kernel(dz1a[:, None], dz2a[:, None], z1a[:, None] - z1b, z2a[:, None] - z2b, dz1b, dz2b)
        return np.stack([K1, K2])

    value, _ = pv_integral(integrand, spec, singular=True)
    return curve.delta_rho / (4.0 * np.pi) * value


def dalpha_velocity1(curve: Curve, alpha0: float, spec: QuadratureSpec = DEFAULT_SPEC, tol: float = 1e-10) -> float:
    """∂_α of the horizontal contour velocity at ``alpha0``.

    Sums the four integrals obtained by differentiating the kernel of the
    first velocity component under the integral sign.  Points where
    ∂_α z₁ vanishes must go through the reduced integral instead.
    """
    ev = curve_evaluator(curve)
    z1a, z2a, dz1a, dz2a, d2z1a, _ = (float(c) for c in ev(np.array(alpha0)))
    if abs(dz1a) <= tol:
        raise UseReducidaError(
            f"d(alpha) z1 vanishes at alpha={alpha0:.6g}; evaluate through reducida_integral"
        )

    def integrand(beta):
        z1b, z2b, dz1b, dz2b, d2z1b, _ = ev(alpha0 - beta)
        d1 = z1a - z1b
        d2 = z2a - z2b
        ddz1 = dz1a - dz1b
        ddz2 = dz2a - dz2b
        dd2z1 = d2z1a - d2z1b
        D = 2.0 * (np.sinh(0.5 * d2) ** 2 + np.sin(0.5 * d1) ** 2)
        s1 = np.sin(d1)
        return (
            np.cos(d1) * ddz1**2 / D
            + s1 * dd2z1 / D
            - s1 * ddz1 * np.sinh(d2) * ddz2 / D**2
            - s1 * ddz1 * s1 * ddz1 / D**2
        )

    value, _ = pv_integral(integrand, spec, singular=True)
    return float(curve.delta_rho / (4.0 * np.pi) * value)


@dataclass(frozen=True, eq=False)
class RealLineGraph:
    """Graph f sampled on the closed uniform grid x_j = −L + 2Lj/(n−1)."""

    L: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 8:
            raise ValueError("need at least 8 samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, L: float, n: int, fn: Callable) -> "RealLineGraph":
        return cls(L, fn(np.linspace(-L, L, n)))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    def derivatives(self):
        """f' and f'' by spectral differentiation with period 2L (data decays at ±L)."""
        v = self.values[:-1]
        m = v.size
        k = np.fft.fftfreq(m, d=self.h) * TWO_PI
        F = np.fft.fft(v)
        k1 = k.copy()
        if m % 2 == 0:
            k1[m // 2] = 0.0
        d1 = np.fft.ifft(1j * k1 * F).real
        d2 = np.fft.ifft(-(k**2) * F).real
        return np.append(d1, d1[0]), np.append(d2, d2[0])

    def decay_ok(self, threshold: float = 1e-8) -> bool:
        d1, _ = self.derivatives()
        far = np.abs(self.x) > 0.5 * self.L
        return bool(np.all(np.abs(self.values[far]) < threshold) and np.all(np.abs(d1[far]) < threshold))


def gregory_weights(n: int, h: float) -> np.ndarray:
    """Trapezoid weights with fourth-order Gregory end corrections."""
    w = np.ones(n)
    w[[0, -1]] = 3.0 / 8.0
    w[[1, -2]] = 7.0 / 6.0
    w[[2, -3]] = 23.0 / 24.0
    return w * h


def graph_rhs_realline(
    graph: RealLineGraph,
    delta_rho: float = DELTA_RHO_DEFAULT,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> np.ndarray:
    """f_t for a graph that is flat at infinity, truncated to [−L, L].

    f_t(α) = Δρ/(2π) PV∫_ℝ (α−β)(f'(α) − f'(β)) / ((α−β)² + (f(α)−f(β))²) dβ.
    The integral over [−L, L] uses the Gregory-corrected trapezoid rule on
    the sample grid (the diagonal takes the limit f''/(1 + f'²)); beyond
    ±L the graph is taken flat, whose contribution f'(α)·½ ln(((α−L)² + f²)
    / ((α+L)² + f²)) is added in closed form.
    """
    if not graph.decay_ok():
        warnings.warn("graph does not decay below 1e-8 for |x| > L/2", TruncationWarning, stacklevel=2)
    x = graph.x
    f = graph.values
    d1, d2 = graph.derivatives()
    n = x.size
    w = gregory_weights(n, graph.h)
    out = np.empty(n)
    rows = max(1, _CHUNK // n)
    for start in range(0, n, rows):
        i = np.arange(start, min(n, start + rows))
        dx = x[i, None] - x[None, :]
        df = f[i, None] - f[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            K = dx * (d1[i, None] - d1[None, :]) / (dx * dx + df * df)
        K[np.arange(i.size), i] = d2[i] / (1.0 + d1[i] ** 2)
        out[i] = K @ w
    L = graph.L
    # at x = ±L with f = 0 the logarithm is singular but multiplied by f' = 0
    tiny = np.finfo(float).tiny
    tail = 0.5 * d1 * (np.log(np.maximum((x - L) ** 2 + f**2, tiny)) - np.log(np.maximum((x + L) ** 2 + f**2, tiny)))
    return delta_rho / TWO_PI * (out + tail)


PAPER_TWO_PHASE = {
    "M1": np.pi + 0.1,
    "r1": 0.7,
    "M2": np.pi / 1.2,
    "r2": 0.3,
    "rho_bar_1": 20.0 * np.pi,
    "rho_bar_2": np.pi / 20.0,
    "f_level": 0.1,
    "g_level": -0.92,
}


def _bump(a, M, r, power):
    """sin^power(π(α − M + r)/(2r)) on |α − M| < r, zero elsewhere (α taken mod 2π)."""
    x = np.remainder(a, TWO_PI)
    inside = np.abs(x - M) < r
    return np.where(inside, np.sin(np.pi * (x - M + r) / (2.0 * r)) ** power, 0.0)


def paper_two_phase_state(grid, params: dict | None = None, g_power: int = 3) -> TwoPhaseState:
    """Initial data of the two-interface experiment.

    f₀ = 0.1 − bump(M₁, r₁) and g₀ = bump(M₂, r₂) − 0.92 with cubed sine
    bumps.  ``g_power = 9`` gives the doubly cubed reading of the lower
    profile.
    """
    p = dict(PAPER_TWO_PHASE)
    p.update(params or {})
    a = grid.alphas
    f = p["f_level"] - _bump(a, p["M1"], p["r1"], 3)
    g = _bump(a, p["M2"], p["r2"], g_power) + p["g_level"]
    return TwoPhaseState(
        GraphInterface(PeriodicField(grid, f)),
        GraphInterface(PeriodicField(grid, g)),
        p["rho_bar_1"],
        p["rho_bar_2"],
    )
