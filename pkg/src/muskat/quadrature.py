"""Principal-value quadrature and the periodic Fourier multipliers H and Λ^s."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .curve import PeriodicField, PeriodicGrid, _fft_coefficients, _from_fft_coefficients, _wavenumbers
from .errors import AliasingError, QuadratureNonconvergence, UnsupportedGridError


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and local-window settings for singular integrals.

    ``method`` selects how the boundary integrals in :mod:`muskat.dynamics`
    are discretised: ``"adaptive"`` (spline interpolant + adaptive
    Gauss-Lobatto) or ``"grid"`` (trapezoid over the nodes of a uniform
    grid with the analytic diagonal limit).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    local_window: float = np.pi / 64
    taylor_order: int = 4
    method: str = "adaptive"
    max_panels: int = 4000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.local_window <= np.pi / 8):
            raise ValueError("local_window must lie in (0, pi/8]")
        if self.taylor_order not in (2, 3, 4):
            raise ValueError("taylor_order must be 2, 3 or 4")
        if self.method not in ("adaptive", "grid"):
            raise ValueError(f"unknown quadrature method {self.method!r}")


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class LocalModel:
    """Integrand near β = 0 written as c·cot(β/2) + Σ_j taylor[j] β^j.

    ``taylor`` may hold arrays (one entry per integrand component).
    """

    cot_coefficient: object = 0.0
    taylor: Sequence = (0.0,)


# 4-point Gauss-Lobatto rule and its 7-point Kronrod extension on [-1, 1]
_A = np.sqrt(2.0 / 3.0)
_B = 1.0 / np.sqrt(5.0)
_NODES = np.array([-1.0, -_A, -_B, 0.0, _B, _A, 1.0])
_W_KRONROD = np.array([77.0, 432.0, 625.0, 672.0, 625.0, 432.0, 77.0]) / 1470.0
_W_LOBATTO = np.array([1.0, 0.0, 5.0, 0.0, 5.0, 0.0, 1.0]) / 6.0


def adaptive_lobatto(
    integrand: Callable,
    edges,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    max_panels: int = 4000,
):
    """Adaptive Gauss-Lobatto/Kronrod quadrature over the panels in ``edges``.

    The integrand is called with a 1-D array of abscissae and may return an
    array whose last axis matches it; panels are shared between components
    and split until every component meets its tolerance.  Returns
    ``(value, error_estimate)`` with the component shape.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    total_width = float(np.sum(hi - lo))
    accepted = None
    accepted_err = None
    total_panels = lo.size
    while True:
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
        y = np.asarray(integrand(x), dtype=float)
        y = y.reshape(y.shape[:-1] + (lo.size, _NODES.size))
        kron = (y @ _W_KRONROD) * half
        lob = (y @ _W_LOBATTO) * half
        err = np.abs(kron - lob)
        est = kron.sum(axis=-1) if accepted is None else accepted + kron.sum(axis=-1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(est))
        share = (hi - lo) / total_width
        ratio = err / (tol[..., None] * share)
        ratio = ratio.reshape(-1, lo.size).max(axis=0) if ratio.ndim > 1 else ratio
        # panels this narrow sit at the rounding floor of the integrand;
        # their error estimates still count towards the total
        ok = (ratio <= 1.0) | (half < 1e-8 * total_width)
        if not np.all(np.isfinite(y)):
            bad = ~np.isfinite(y.reshape(-1, lo.size, _NODES.size)).all(axis=(0, 2))
            ok &= ~bad
            if np.any(bad & (hi - lo < 1e-13 * total_width)):
                j = int(np.argmax(bad))
                raise QuadratureNonconvergence(
                    "integrand is not finite", interval=(float(lo[j]), float(hi[j])), error=np.inf
                )
        part = kron[..., ok].sum(axis=-1)
        part_err = err[..., ok].sum(axis=-1)
        accepted = part if accepted is None else accepted + part
        accepted_err = part_err if accepted_err is None else accepted_err + part_err
        if np.all(ok):
            return accepted, accepted_err
        lo, hi = lo[~ok], hi[~ok]
        total_panels += lo.size
        if total_panels > max_panels:
            worst = int(np.argmax(ratio[~ok]))
            raise QuadratureNonconvergence(
                f"adaptive quadrature exceeded {max_panels} panels",
                interval=(float(lo[worst]), float(hi[worst])),
                error=float(np.max(err[..., ~ok])),
            )
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]


def _outer_edges(h: float, n_uniform: int = 8) -> np.ndarray:
    geo = h * 2.0 ** np.arange(0, 64)
    geo = geo[geo < np.pi]
    uni = np.linspace(h, np.pi, n_uniform + 1)
    return np.unique(np.concatenate([geo, uni, [np.pi]]))


def _fit_local(integrand, h, spec):
    """Even polynomial model of the symmetrised integrand on (0, h)."""
    m = spec.taylor_order + 4
    t, w = np.polynomial.legendre.leggauss(m)
    x = 0.5 * h * (t + 1.0)
    w = 0.5 * h * w
    g = np.asarray(integrand(x), dtype=float) + np.asarray(integrand(-x), dtype=float)
    powers = np.arange(0, spec.taylor_order + 1, 2)
    V = (x[:, None] / h) ** powers[None, :]
    flat = g.reshape(-1, m).T
    coef, *_ = np.linalg.lstsq(V, flat, rcond=None)
    model = h * (coef / (powers + 1.0)[:, None]).sum(axis=0)
    direct = flat.T @ w
    shape = g.shape[:-1]
    return model.reshape(shape), np.abs(model - direct).reshape(shape), direct.reshape(shape)


def pv_integral(
    integrand: Callable,
    spec: QuadratureSpec = DEFAULT_SPEC,
    local_model: Optional[LocalModel] = None,
    singular: bool = True,
    breakpoints=None,
):
    """Principal value of ∫_{−π}^{π} integrand(β) dβ.

    With ``singular=True`` the integrand may carry an odd, cot(β/2)-type
    singularity at 0.  The window (−h, h) is then handled by a local model:
    the cot part integrates to zero by symmetry and the regular remainder
    through its Taylor polynomial, either supplied as ``local_model`` or
    fitted from samples of I(β) + I(−β) inside the window (shrinking the
    window until the fit is accurate).  The rest of the circle is integrated
    adaptively on the symmetrised integrand.

    Returns ``(value, error_estimate)``.
    """
    if not singular:
        edges = np.linspace(-np.pi, np.pi, 9)
        if breakpoints is not None:
            edges = np.unique(np.concatenate([edges, np.asarray(breakpoints, dtype=float)]))
        return adaptive_lobatto(integrand, edges, spec.rel_tol, spec.abs_tol, spec.max_panels)

    h = spec.local_window
    if local_model is not None:
        powers = np.arange(len(local_model.taylor))
        even = powers % 2 == 0
        inner = sum(
            2.0 * np.asarray(c) * h ** (j + 1) / (j + 1)
            for j, c in zip(powers[even], np.asarray(local_model.taylor, dtype=object)[even])
        )
        last = np.asarray(local_model.taylor[-1])
        inner_err = np.abs(2.0 * last * h ** (len(local_model.taylor)) / len(local_model.taylor))
    else:
        for _ in range(12):
            inner, inner_err, direct = _fit_local(integrand, h, spec)
            scale = np.maximum(np.abs(direct) * np.pi / h, 1.0)
            if np.all(inner_err <= np.maximum(spec.abs_tol, spec.rel_tol * scale) * h / np.pi):
                break
            h *= 0.5

    def symmetric(x):
        return np.asarray(integrand(x), dtype=float) + np.asarray(integrand(-x), dtype=float)

    edges = _outer_edges(h)
    if breakpoints is not None:
        bp = np.abs(np.asarray(breakpoints, dtype=float))
        edges = np.unique(np.concatenate([edges, bp[(bp > h) & (bp < np.pi)]]))
    outer, outer_err = adaptive_lobatto(symmetric, edges, spec.rel_tol, spec.abs_tol, spec.max_panels)
    return inner + outer, inner_err + outer_err


def _require_uniform(fld: PeriodicField):
    if not fld.grid.uniform:
        raise UnsupportedGridError("Fourier multipliers need a uniform grid")


def _multiplier(fld: PeriodicField, symbol: Callable) -> PeriodicField:
    _require_uniform(fld)
    n = fld.n
    k = _wavenumbers(n)
    sym = symbol(k).astype(complex)
    if n % 2 == 0:
        sym[n // 2] = 0.0
    return PeriodicField(fld.grid, _from_fft_coefficients(_fft_coefficients(fld.values) * sym))


def hilbert_transform(fld: PeriodicField) -> PeriodicField:
    """H with symbol −i·sgn(k), so that H(cos kα) = sin kα."""
    return _multiplier(fld, lambda k: -1j * np.sign(k))


def lambda_op(fld: PeriodicField, s: float = 1.0) -> PeriodicField:
    """Λ^s with symbol |k|^s (Λ = (−Δ)^{1/2})."""
    if s not in (0.5, 1.0, 1):
        raise ValueError("s must be 1/2 or 1")
    return _multiplier(fld, lambda k: np.abs(k) ** s)


def ad_inequality_margin(g: PeriodicField, floor: float = 1e-12) -> float:
    """min over nodes of 2gΛg − Λ(g²) for a real trigonometric polynomial g.

    The product is formed on a doubled grid so g² is resolved exactly.
    """
    _require_uniform(g)
    n = g.n
    A = _fft_coefficients(g.values)
    k = _wavenumbers(n)
    amp = np.abs(A)
    if np.any(amp[np.abs(k) > n // 4] > floor * max(amp.max(), 1e-300)):
        raise AliasingError(f"degree exceeds n/4 = {n // 4}; g**2 would alias")
    fine = PeriodicGrid.uniform_grid(2 * n)
    Af = np.zeros(2 * n, dtype=complex)
    keep = np.abs(k) <= n // 4
    Af[k[keep].astype(int) % (2 * n)] = A[keep]
    gf = PeriodicField(fine, _from_fft_coefficients(Af))
    expr = 2.0 * gf.values * lambda_op(gf).values - lambda_op(PeriodicField(fine, gf.values**2)).values
    return float(np.min(expr[::2]))


_MIN_HALF = 1e-8


def _rules(y, half):
    return (y @ _W_KRONROD) * half, (y @ _W_LOBATTO) * half


def source_panel_quadrature(
    kernel: Callable,
    targets: np.ndarray,
    knots: np.ndarray,
    source: Callable,
    spec: QuadratureSpec = DEFAULT_SPEC,
    diagonal: Optional[np.ndarray] = None,
    chunk: int = 2**20,
    first_pass: Optional[Callable] = None,
):
    """Per-target adaptive Gauss-Lobatto/Kronrod integration over one period
    of a source parameter γ, with the source interpolant's intervals as base
    panels.

    ``source(x)`` returns a tuple of arrays shaped like ``x`` (the source
    interpolant and whatever derivatives the kernel needs) and
    ``kernel(i, x, src)`` returns an array of shape ``(C,) + x.shape`` for
    target indices ``i`` broadcastable against ``x``.  When ``diagonal``
    (shape ``(C, len(targets))``) is given, targets coincide with the knots
    and panel endpoints sitting on a target's own knot take the diagonal
    limit value instead of the kernel.

    ``first_pass(xb, src_b, half)``, if given, replaces the vectorised
    evaluation over the base panels (node array ``xb`` of shape (nk, 7)) and
    must return the Kronrod and Lobatto panel sums, each of shape
    ``(C, len(targets), nk)``, with the diagonal already substituted.

    Each (target, panel) pair is split independently until its Lobatto and
    Kronrod estimates agree within its share of the target's tolerance,
    which is relative to the integral of the integrand's modulus.
    Returns ``(values, errors)``, both of shape ``(C, len(targets))``.
    """
    targets = np.asarray(targets, dtype=float)
    knots = np.asarray(knots, dtype=float)
    nt, nk = targets.size, knots.size
    edges = np.append(knots, knots[0] + 2.0 * np.pi)
    lo0, hi0 = edges[:-1], edges[1:]
    half0 = 0.5 * (hi0 - lo0)
    xb = 0.5 * (lo0 + hi0)[:, None] + half0[:, None] * _NODES[None, :]
    xb[:, 0], xb[:, -1] = lo0, hi0
    src_b = source(xb)

    rows = max(1, chunk // (nk * _NODES.size))
    kron_all = None
    err_all = None
    if first_pass is not None:
        kron_all, lob = first_pass(xb, src_b, half0)
        err_all = np.abs(kron_all - lob)
        rows = nt
    for start in range(0 if first_pass is None else nt, nt, rows):
        idx = np.arange(start, min(nt, start + rows))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = np.asarray(kernel(idx[:, None, None], xb[None], tuple(s[None] for s in src_b)), dtype=float)
        if y.ndim == 3:
            y = y[None]
        if diagonal is not None:
            local = np.arange(idx.size)
            y[:, local, idx, 0] = diagonal[:, idx]
            y[:, local, (idx - 1) % nk, -1] = diagonal[:, idx]
        kron, lob = _rules(y, half0)
        if kron_all is None:
            C = kron.shape[0]
            kron_all = np.empty((C, nt, nk))
            err_all = np.empty((C, nt, nk))
        kron_all[:, idx] = kron
        err_all[:, idx] = np.abs(kron - lob)

    C = kron_all.shape[0]
    # tolerance relative to the integral of |integrand|, robust to cancellation
    scale = np.abs(kron_all).sum(axis=-1)
    tol = np.maximum(spec.abs_tol, spec.rel_tol * scale)
    share = (hi0 - lo0) / (2.0 * np.pi)
    bad = np.any(err_all > tol[:, :, None] * share[None, None, :], axis=0)
    if not np.all(np.isfinite(kron_all)):
        bad |= ~np.all(np.isfinite(kron_all), axis=0)
    kron_all[:, bad] = 0.0
    err_all[:, bad] = 0.0
    value = kron_all.sum(axis=-1)
    error = err_all.sum(axis=-1)

    owner, panel = np.nonzero(bad)
    lo, hi = lo0[panel], hi0[panel]
    dlo = np.zeros(owner.size, dtype=bool)
    dhi = np.zeros(owner.size, dtype=bool)
    if diagonal is not None:
        dlo = panel == owner
        dhi = panel == (owner - 1) % nk
    budget = spec.max_panels * nt
    used = 0
    while owner.size:
        mid = 0.5 * (lo + hi)
        owner = np.concatenate([owner, owner])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        dlo, dhi = np.concatenate([dlo, np.zeros_like(dlo)]), np.concatenate([np.zeros_like(dhi), dhi])
        used += owner.size
        if used > budget:
            j = int(np.argmin(hi - lo))
            raise QuadratureNonconvergence(
                f"panel quadrature did not converge for target {targets[owner[j]]:.9g}",
                interval=(float(lo[j]), float(hi[j])),
                error=float(tol[:, owner[j]].max()),
            )
        half = 0.5 * (hi - lo)
        x = 0.5 * (lo + hi)[:, None] + half[:, None] * _NODES[None, :]
        x[:, 0], x[:, -1] = lo, hi
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = np.asarray(kernel(owner[:, None], x, source(x)), dtype=float)
        if y.ndim == 2:
            y = y[None]
        if diagonal is not None:
            y[:, dlo, 0] = diagonal[:, owner[dlo]]
            y[:, dhi, -1] = diagonal[:, owner[dhi]]
        kron, lob = _rules(y, half)
        err = np.abs(kron - lob)
        allowed = tol[:, owner] * (2.0 * half / (2.0 * np.pi))
        # panels this short only resolve rounding noise in the kernel's differences
        ok = (np.all(err <= allowed, axis=0) | (half < _MIN_HALF)) & np.all(np.isfinite(kron), axis=0)
        for c in range(C):
            np.add.at(value[c], owner[ok], kron[c, ok])
            np.add.at(error[c], owner[ok], err[c, ok])
        keep = ~ok
        owner, lo, hi, dlo, dhi = owner[keep], lo[keep], hi[keep], dlo[keep], dhi[keep]
    return value, error
