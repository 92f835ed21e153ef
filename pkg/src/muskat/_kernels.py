"""Compiled first-pass panel sums for the periodic boundary-integral kernels.

Each routine evaluates one kernel at the seven Gauss-Lobatto-Kronrod nodes
of every (target, source panel) pair and returns the Kronrod and Lobatto
panel sums.  Endpoints that coincide with the target's own node take the
diagonal limit when ``diag`` is non-empty.

The half-angle sines and hyperbolic sines of the differences are formed by
the addition theorems from per-point values, so the inner loop has no
transcendental calls.  The relative rounding error of the kernel grows like
eps/|distance|; the Gauss nodes never come closer to a target than a few
percent of a cell, and the adaptive pass re-evaluates flagged panels with
the direct formulas.
"""

import math

import numpy as np
from numba import njit


def half_angles(x):
    """(sin(x/2), cos(x/2)) for the addition-theorem kernels."""
    return np.sin(0.5 * x), np.cos(0.5 * x)


def half_hyperbolic(x):
    """(sinh(x/2), cosh(x/2))."""
    return np.sinh(0.5 * x), np.cosh(0.5 * x)


@njit(cache=True)
def interaction_panels(sa, ca, shu, chu, du, sx, cx, shv, chv, dvb, half, wk, wl, diag):
    """I-kernel sums: (u'(α) − v'(γ)) sin(β/2)cos(β/2) / (sinh²(Δ/2) + sin²(β/2))."""
    nt = sa.size
    nk, m = sx.shape
    kron = np.empty((1, nt, nk))
    lob = np.empty((1, nt, nk))
    self_term = diag.size > 0
    for i in range(nt):
        for p in range(nk):
            sk = 0.0
            sl = 0.0
            for q in range(m):
                if self_term and ((q == 0 and p == i) or (q == m - 1 and p == (i - 1) % nk)):
                    y = diag[i]
                else:
                    sn = sa[i] * cx[p, q] - ca[i] * sx[p, q]
                    cn = ca[i] * cx[p, q] + sa[i] * sx[p, q]
                    sh = shu[i] * chv[p, q] - chu[i] * shv[p, q]
                    y = (du[i] - dvb[p, q]) * sn * cn / (sh * sh + sn * sn)
                sk += wk[q] * y
                sl += wl[q] * y
            kron[0, i, p] = sk * half[p]
            lob[0, i, p] = sl * half[p]
    return kron, lob


@njit(cache=True)
def contour_panels(s1, c1, sh2, ch2, dz1, dz2, sx, cx, shx, chx, dz1b, dz2b, half, wk, wl, diag):
    """Contour-kernel sums for both components: sin(Δz₁)(∂z(α) − ∂z(γ)) / (cosh Δz₂ − cos Δz₁)."""
    nt = s1.size
    nk, m = sx.shape
    kron = np.empty((2, nt, nk))
    lob = np.empty((2, nt, nk))
    for i in range(nt):
        for p in range(nk):
            sk1 = 0.0
            sl1 = 0.0
            sk2 = 0.0
            sl2 = 0.0
            for q in range(m):
                if (q == 0 and p == i) or (q == m - 1 and p == (i - 1) % nk):
                    y1 = diag[0, i]
                    y2 = diag[1, i]
                else:
                    sn = s1[i] * cx[p, q] - c1[i] * sx[p, q]
                    cn = c1[i] * cx[p, q] + s1[i] * sx[p, q]
                    sh = sh2[i] * chx[p, q] - ch2[i] * shx[p, q]
                    w = sn * cn / (sh * sh + sn * sn)
                    y1 = w * (dz1[i] - dz1b[p, q])
                    y2 = w * (dz2[i] - dz2b[p, q])
                sk1 += wk[q] * y1
                sl1 += wl[q] * y1
                sk2 += wk[q] * y2
                sl2 += wl[q] * y2
            kron[0, i, p] = sk1 * half[p]
            lob[0, i, p] = sl1 * half[p]
            kron[1, i, p] = sk2 * half[p]
            lob[1, i, p] = sl2 * half[p]
    return kron, lob
