"""Turning initial data, its certificate, and turnover detection.

The construction produces an odd curve z = (β − sin β, z₂(β)) with a
vertical tangent at the origin, ∂_α z₂(0) > 0, and a certified negative
value of the reduced integral

    2 ∂_α z₂(0) ∫₀^π sin(z₁) sinh(z₂) ∂_α z₁ / (cosh z₂ − cos z₁)² dβ,

which equals ∂_α v₁(0) for the contour velocity without its Δρ/(4π)
factor.  A negative value means the tangent at the origin tips over
immediately, so the interface stops being a graph.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .curve import Curve, PeriodicField, PeriodicGrid, _fft_coefficients, arc_chord_constant, min_slope
from .errors import (
    ArcChordViolation,
    ConstructionError,
    FamilyInvalidError,
    IncreaseModesError,
    SearchFailureError,
    UnsupportedGridError,
)
from .quadrature import DEFAULT_SPEC, QuadratureSpec, adaptive_lobatto

ODD_TOL = 1e-12
SLOPE_TOL = 1e-12
B_MAX = 1e12


@dataclass
class TurnoverCertificate:
    """Parameters of a turning datum and the certified sign of ∂_α v₁(0)."""

    beta1: float
    beta2: float
    b: float
    n_modes: int
    integral_value: float
    integral_error: float
    dz2_at_0: float
    conditions: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.beta1 < self.beta2 < np.pi):
            raise ConstructionError("need 0 < beta1 < beta2 < pi")

    @property
    def passed(self) -> bool:
        return self.integral_value + self.integral_error < 0.0 and all(self.conditions.values())

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


# ---------------------------------------------------------------------------
# odd fields with cancellation-free evaluation near β = 0


def _x_minus_sin(x):
    """x − sin x without cancellation for small |x|."""
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = np.abs(x) < 0.5
    xs = x[small]
    x2 = xs * xs
    # Taylor series to x¹³; truncation below 1e-16 relative for |x| < 0.5
    out[small] = xs * x2 * (
        1 / 6 - x2 * (1 / 120 - x2 * (1 / 5040 - x2 * (1 / 362880 - x2 * (1 / 39916800 - x2 / 6227020800))))
    )
    return out


class _TrigSeries:
    """Real trigonometric series a₀ + Σ a_k cos kβ + b_k sin kβ from uniform samples."""

    def __init__(self, fld: PeriodicField):
        if not fld.grid.uniform:
            raise UnsupportedGridError("the reduced integral needs fields on a uniform grid")
        n = fld.n
        A = _fft_coefficients(fld.values)
        K = (n - 1) // 2
        self.k = np.arange(1, K + 1, dtype=float)
        self.a0 = float(A[0].real)
        self.a = 2.0 * A[1 : K + 1].real
        self.b = -2.0 * A[1 : K + 1].imag

    def __call__(self, x):
        kx = np.multiply.outer(x, self.k)
        return self.a0 + np.cos(kx) @ self.a + np.sin(kx) @ self.b

    def derivative(self, x):
        kx = np.multiply.outer(x, self.k)
        return np.cos(kx) @ (self.k * self.b) - np.sin(kx) @ (self.k * self.a)

    def slope_at_0(self) -> float:
        return float(self.k @ self.b)

    def third_derivative_at_0(self) -> float:
        return float(-(self.k**3) @ self.b)

    def odd_defect(self) -> float:
        return float(abs(self.a0) + np.abs(self.a).sum())


class _LiftedZ1:
    """z₁(β) = β + p(β) and ∂z₁, written so the cancellation at a vertical tangent is exact."""

    def __init__(self, p: PeriodicField):
        self.s = _TrigSeries(p)
        self.s0 = 1.0 + self.s.slope_at_0()

    def __call__(self, x):
        s = self.s
        kx = np.multiply.outer(x, s.k)
        even = s.a0 + np.cos(kx) @ s.a
        return x * self.s0 + even - _x_minus_sin(kx) @ s.b

    def derivative(self, x):
        s = self.s
        kx = np.multiply.outer(x, s.k)
        return self.s0 - np.sin(kx) @ (s.k * s.a) - 2.0 * np.sin(0.5 * kx) ** 2 @ (s.k * s.b)


def _reduced_integrand(z1, dz1, z2):
    """sin(z₁) sinh(z₂) ∂z₁ / (cosh z₂ − cos z₁)², overflow-free in z₂."""
    q = np.exp(-np.abs(z2))
    one_minus_q = -np.expm1(-np.abs(z2))
    denom = one_minus_q**2 + 4.0 * q * np.sin(0.5 * z1) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        val = 2.0 * np.sign(z2) * q * one_minus_q * (1.0 + q) * np.sin(z1) * dz1 / denom**2
    return np.where(denom > 0.0, val, 0.0)


def _piece(z1e: _LiftedZ1, z2fn: Callable, lo: float, hi: float, spec: QuadratureSpec):
    if hi <= lo:
        return 0.0, 0.0
    # geometric panels resolve layers of width ~ lo next to either end
    # (large b gives a layer near the zero of z* as well as near 0)
    geo = lo * 2.0 ** np.arange(64)
    geo = geo[geo < hi - lo]
    edges = np.unique(np.concatenate([geo, hi - geo, np.linspace(lo, hi, 17)]))
    edges = edges[(edges >= lo) & (edges <= hi)]

    def f(x):
        return _reduced_integrand(z1e(x), z1e.derivative(x), z2fn(x))

    v, e = adaptive_lobatto(f, edges, spec.rel_tol, spec.abs_tol, spec.max_panels)
    return float(v), float(e)


def _series_window(z1e: _LiftedZ1, a: float, spec: QuadratureSpec, h: float):
    """∫₀^h of the leading term 12 c₃² β² / a³ (c₃ = z₁'''(0)/6)."""
    c3 = z1e.s.third_derivative_at_0() / 6.0
    return 4.0 * c3 * c3 * h**3 / a**3


def _check_vertical_tangent(z1e: _LiftedZ1, a: float):
    if abs(z1e.s0) > SLOPE_TOL:
        raise ConstructionError(f"d(alpha) z1(0) = {z1e.s0:.3e} is not zero; the reduced form does not apply")
    if not a > 0.0:
        raise ConstructionError("d(alpha) z2(0) must be positive for a removable singularity at 0")


def _reduced_parts(z1e: _LiftedZ1, z2s: _TrigSeries, a: float, split: Optional[float], spec: QuadratureSpec,
                   z2fn: Optional[Callable] = None):
    """(inner, inner_err, outer, outer_err) of ∫₀^π, split at ``split`` (or π)."""
    z2fn = z2s if z2fn is None else z2fn
    split = np.pi if split is None else split
    # leading-order series only: keep the window well inside its validity
    h = min(spec.local_window, 0.05 / a, 0.5 * split) / 16.0
    series = _series_window(z1e, a, spec, h)
    # error of the leading-order window, by halving it
    half_series = _series_window(z1e, a, spec, 0.5 * h)
    mid, mid_err = _piece(z1e, z2fn, 0.5 * h, h, spec)
    series_err = abs(series - (half_series + mid))
    inner, inner_err = _piece(z1e, z2fn, h, split, spec)
    outer, outer_err = _piece(z1e, z2fn, split, np.pi, spec)
    return series + inner, inner_err + series_err + mid_err, outer, outer_err


def reducida_integral(z1: PeriodicField, z2: PeriodicField, dz2_at_0: float, spec: QuadratureSpec = DEFAULT_SPEC,
                      breakpoint: Optional[float] = None):
    """Reduced form of ∂_α v₁(0) for an odd curve with a vertical tangent at 0.

    ``z1`` holds the periodic part z₁(α) − α and ``z2`` the height, both on
    a uniform grid; they are evaluated through their trigonometric
    interpolants.  The β ∈ (0, h) piece uses the leading series term
    12 c₃² β²/a³ of the integrand (c₃ = z₁'''(0)/6, a = ∂z₂(0)).  Returns
    ``(value, error)``; the value omits the Δρ/(4π) factor of the velocity.
    """
    if dz2_at_0 == 0.0:
        return 0.0, 0.0
    z1e = _LiftedZ1(z1)
    z2s = _TrigSeries(z2)
    a = z2s.slope_at_0()
    _check_vertical_tangent(z1e, a)
    inner, ie, outer, oe = _reduced_parts(z1e, z2s, a, breakpoint, spec)
    pref = 2.0 * dz2_at_0
    return pref * (inner + outer), abs(pref) * (ie + oe)


# ---------------------------------------------------------------------------
# construction


def build_z1(grid: PeriodicGrid) -> PeriodicField:
    """z₁ − α = −sin α, so that z₁ = α − sin α has a vertical tangent at 0."""
    return PeriodicField(grid, -np.sin(grid.alphas))


def zstar_default(beta1: float) -> Callable:
    """The family z*(β) = sin β (cos β − cos β₁)."""
    c1 = np.cos(beta1)
    return lambda x: np.sin(x) * (np.cos(x) - c1)


def check_zstar(zstar: PeriodicField, beta1: float, beta2: float) -> dict:
    """Evaluate the five sign conditions on the grid nodes (a: odd, b–e: signs)."""
    s = _TrigSeries(zstar)
    a = zstar.grid.alphas
    v = zstar.values
    pos = a > 0
    return {
        "odd": s.odd_defect() <= ODD_TOL * max(1.0, np.abs(v).max()),
        "slope_positive_at_0": s.slope_at_0() > 0.0,
        "positive_below_beta1": bool(np.all(v[pos & (a < beta1)] > 0.0)),
        "negative_to_beta2": bool(np.all(v[(a > beta1) & (a <= beta2)] < 0.0)),
        "nonpositive_after_beta2": bool(np.all(v[a >= beta2] <= 0.0)),
    }


def build_zstar(grid: PeriodicGrid, beta1: float, beta2: float, family: Optional[Callable] = None) -> PeriodicField:
    """Sample z* (default family unless ``family`` is given) and check its sign conditions."""
    if not (0.0 < beta1 < beta2 < np.pi):
        raise ConstructionError("need 0 < beta1 < beta2 < pi")
    fn = zstar_default(beta1) if family is None else family
    zs = PeriodicField(grid, fn(grid.alphas))
    failed = [k for k, ok in check_zstar(zs, beta1, beta2).items() if not ok]
    if failed:
        raise ConstructionError(f"z* violates: {', '.join(failed)}")
    return zs


def assemble_tilde_z(zstar: PeriodicField, b: float, beta1: float) -> PeriodicField:
    """b·z* on |β| ≤ β₁ and z* elsewhere."""
    if not b > 0.0:
        raise ConstructionError("b must be positive")
    a = zstar.grid.alphas
    return PeriodicField(zstar.grid, np.where(np.abs(a) <= beta1, b * zstar.values, zstar.values))


def reduced_split(z1: PeriodicField, zstar: PeriodicField, b: float, beta1: float,
                  spec: QuadratureSpec = DEFAULT_SPEC):
    """(inner, inner_err, outer, outer_err) for z̃ = b·z* on (0, β₁) and z* on (β₁, π).

    Uses the exact piecewise profile rather than its grid samples, so the
    kink at β₁ costs nothing.
    """
    z1e = _LiftedZ1(z1)
    zs = _TrigSeries(zstar)
    a = b * zs.slope_at_0()
    _check_vertical_tangent(z1e, a)

    def z2fn(x):
        return np.where(np.abs(x) <= beta1, b, 1.0) * zs(x)

    return _reduced_parts(z1e, zs, a, beta1, spec, z2fn=z2fn)


def find_b(z1: PeriodicField, zstar: PeriodicField, beta1: float, spec: QuadratureSpec = DEFAULT_SPEC,
           b_max: float = B_MAX) -> float:
    """Smallest b = 2^j (j ≥ 0) for which the reduced integral of z̃ is certifiably negative."""
    # the (β₁, π) part does not depend on b, so its sign is checked first
    outer, outer_err = _piece(_LiftedZ1(z1), _TrigSeries(zstar), beta1, np.pi, spec)
    if outer + outer_err >= 0.0:
        raise FamilyInvalidError(f"(beta1, pi) contribution {outer:.6g} is not negative; no b can fix the sign")
    b = 1.0
    while b <= b_max:
        inner, inner_err, _, _ = reduced_split(z1, zstar, b, beta1, spec)
        if inner + outer + inner_err + outer_err < 0.0:
            return b
        b *= 2.0
    raise SearchFailureError(f"no b <= {b_max:g} makes the reduced integral negative")


def smoothing_weights(k, n_modes: int, kind: str = "exponential") -> np.ndarray:
    """Spectral filter σ(k/N): exponential exp(−36 (k/N)^8), Fejér 1 − k/(N+1), or none."""
    r = np.asarray(k, dtype=float) / n_modes
    if kind == "exponential":
        return np.exp(-36.0 * r**8)
    if kind == "fejer":
        return 1.0 - np.asarray(k, dtype=float) / (n_modes + 1.0)
    if kind == "none":
        return np.ones_like(r)
    raise ValueError(f"unknown smoothing {kind!r}")


def sine_projection(tilde_z: PeriodicField, n_modes: int, weights: str = "exponential") -> PeriodicField:
    """Odd part of ``tilde_z`` on sine modes 1..n_modes, filtered by ``weights``."""
    grid = tilde_z.grid
    if not grid.uniform:
        raise UnsupportedGridError("smoothing needs a uniform grid")
    if 2 * n_modes >= grid.n:
        raise IncreaseModesError(f"{grid.n} nodes cannot carry {n_modes} sine modes")
    s = _TrigSeries(tilde_z)
    k = np.arange(1, n_modes + 1)
    bk = s.b[:n_modes] * smoothing_weights(k, n_modes, weights)
    return PeriodicField(grid, np.sin(np.multiply.outer(grid.alphas, k)) @ bk)


def _conditions(curve: Curve) -> dict:
    p = _TrigSeries(curve.z1_minus_alpha)
    z2 = _TrigSeries(curve.z2)
    a = curve.grid.alphas
    dz1 = curve.dz1()
    away = np.abs(a) > 0.0
    try:
        finite = np.isfinite(arc_chord_constant(curve))
    except ArcChordViolation:
        finite = False
    scale = max(1.0, np.abs(curve.z2.values).max())
    return {
        "odd": p.odd_defect() <= ODD_TOL and z2.odd_defect() <= ODD_TOL * scale,
        "slope_positive_away_from_0": bool(np.all(dz1[away] > 0.0)),
        "slope_zero_at_0": abs(1.0 + p.slope_at_0()) <= SLOPE_TOL,
        "dz2_positive_at_0": z2.slope_at_0() > 0.0,
        "arc_chord_finite": bool(finite),
    }


def certify(curve: Curve, beta1: float, beta2: float, b: float, n_modes: int,
            spec: QuadratureSpec = DEFAULT_SPEC) -> TurnoverCertificate:
    """Evaluate the structural conditions and the reduced integral of ``curve``."""
    conditions = _conditions(curve)
    a = _TrigSeries(curve.z2).slope_at_0()
    if conditions["slope_zero_at_0"] and a > 0.0:
        value, err = reducida_integral(curve.z1_minus_alpha, curve.z2, a, spec)
    else:
        value, err = np.nan, np.inf
    return TurnoverCertificate(beta1, beta2, b, n_modes, float(value), float(err), float(a), conditions)


def analytic_smooth(tilde_z: PeriodicField, n_modes: int, z1: Optional[PeriodicField] = None,
                    spec: QuadratureSpec = DEFAULT_SPEC, weights: str = "exponential",
                    beta1: float = 1.0, beta2: float = 2.0, b: float = 1.0, check: bool = True) -> PeriodicField:
    """Filtered sine series of ``tilde_z``, kept only if the certificate survives.

    With ``check`` the curve (z₁, smoothed z₂) is re-certified and
    :class:`IncreaseModesError` is raised when the sign or a structural
    condition is lost.
    """
    z2 = sine_projection(tilde_z, n_modes, weights)
    if check:
        z1 = build_z1(tilde_z.grid) if z1 is None else z1
        cert = certify(Curve(z1, z2), beta1, beta2, b, n_modes, spec)
        if not cert.passed:
            failed = [k for k, ok in cert.conditions.items() if not ok]
            raise IncreaseModesError(
                f"certificate lost after smoothing to {n_modes} modes "
                f"(value {cert.integral_value:.3g} +- {cert.integral_error:.1g}; failed: {failed or 'none'})"
            )
    return z2


def construct_turning_datum(beta1: float = 1.0, beta2: float = 2.0, n_modes: int = 128,
                            spec: QuadratureSpec = DEFAULT_SPEC, n: Optional[int] = None,
                            weights: str = "exponential", delta_rho: float = 4.0 * np.pi):
    """Build the turning curve z = (β − sin β, z₂(β)) and its certificate.

    ``n`` defaults to 4·n_modes grid nodes.
    """
    if not (0.0 < beta1 < beta2 < np.pi):
        raise ConstructionError("need 0 < beta1 < beta2 < pi")
    grid = PeriodicGrid.uniform_grid(4 * n_modes if n is None else n)
    z1 = build_z1(grid)
    zstar = build_zstar(grid, beta1, beta2)
    b = find_b(z1, zstar, beta1, spec)
    tilde = assemble_tilde_z(zstar, b, beta1)
    z2 = analytic_smooth(tilde, n_modes, z1, spec, weights, beta1, beta2, b)
    curve = Curve(z1, z2, delta_rho)
    return curve, certify(curve, beta1, beta2, b, n_modes, spec)


def recheck_certificate(curve: Curve, cert: TurnoverCertificate, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Recompute the reduced integral at doubled resolution.

    Halves the series window, tightens both tolerances a hundredfold and
    returns the absolute difference to ``cert.integral_value``.
    """
    fine = QuadratureSpec(
        rel_tol=spec.rel_tol * 1e-2,
        abs_tol=spec.abs_tol * 1e-2,
        local_window=spec.local_window / 2.0,
        taylor_order=spec.taylor_order,
        max_panels=2 * spec.max_panels,
    )
    value, _ = reducida_integral(curve.z1_minus_alpha, curve.z2, cert.dz2_at_0, fine)
    return abs(value - cert.integral_value)


# ---------------------------------------------------------------------------
# detection


def _interp_state(c0: Curve, c1: Curve, theta: float) -> Curve:
    return Curve(
        PeriodicField(c0.grid, (1 - theta) * c0.z1_minus_alpha.values + theta * c1.z1_minus_alpha.values),
        PeriodicField(c0.grid, (1 - theta) * c0.z2.values + theta * c1.z2.values),
        c0.delta_rho,
    )


def detect_turnover(trajectory, slope_tol: float = SLOPE_TOL, bisections: int = 40):
    """First time the minimum of ∂_α z₁ over the nodes drops below −slope_tol.

    Scans the stored snapshots; between the bracketing pair the state is
    interpolated linearly in time and the crossing is located by bisection.
    Returns ``(t_star, alpha_star)`` or ``None``.
    """
    snaps = trajectory.snapshots
    prev = None
    for t, curve in snaps:
        s, _ = min_slope(curve)
        if s < -slope_tol:
            if prev is None:
                return float(t), float(min_slope(curve)[1])
            t0, c0 = prev
            if not c0.grid.same_as(curve.grid):
                return float(t), float(min_slope(curve)[1])
            lo, hi = 0.0, 1.0
            for _ in range(bisections):
                mid = 0.5 * (lo + hi)
                if min_slope(_interp_state(c0, curve, mid))[0] < -slope_tol:
                    hi = mid
                else:
                    lo = mid
            _, a_star = min_slope(_interp_state(c0, curve, hi))
            return float(t0 + hi * (t - t0)), float(a_star)
        prev = (t, curve)
    return None


def negative_slope_interval(curve: Curve, samples: int = 4096):
    """Widest open α-interval on which the interpolated ∂_α z₁ is negative, or None."""
    x = -np.pi + 2.0 * np.pi * np.arange(samples) / samples
    dz1 = 1.0 + _TrigSeries(curve.z1_minus_alpha).derivative(x) if curve.grid.uniform else None
    if dz1 is None:
        from .spline import PeriodicSpline

        dz1 = 1.0 + PeriodicSpline(curve.grid.alphas, curve.z1_minus_alpha.values)(x, 1)
    neg = dz1 < 0.0
    if not np.any(neg):
        return None
    best, start, run = None, None, 0
    for j, flag in enumerate(neg):
        if flag:
            start = j if start is None else start
            run = j - start + 1
            if best is None or run > best[1] - best[0] + 1:
                best = (start, j)
        else:
            start = None
    i0, i1 = best
    return float(x[i0]), float(x[i1])
