import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from muskat.curve import Curve, GraphInterface, PeriodicField, PeriodicGrid
from muskat.dynamics import (
    PAPER_TWO_PHASE,
    RealLineGraph,
    TwoPhaseState,
    contour_rhs_periodic,
    contour_velocity_at,
    dalpha_velocity1,
    graph_rhs_realline,
    interaction_rhs,
    paper_two_phase_state,
    two_phase_rhs,
)
from muskat.errors import NearTouchingError, TruncationWarning, UseReducidaError
from muskat.quadrature import QuadratureSpec

from conftest import random_trig

G128 = PeriodicGrid.uniform_grid(128)
GRID_SPEC = QuadratureSpec(method="grid")
EPS = 1e-3


def _graph(grid, fn):
    return GraphInterface.from_function(grid, fn)


@pytest.mark.parametrize("spec", [QuadratureSpec(), GRID_SPEC], ids=["adaptive", "grid"])
def test_interaction_flat(spec):
    u = _graph(G128, lambda a: np.full_like(a, 0.3))
    assert np.max(np.abs(interaction_rhs(u, u, spec).values)) < 1e-12
    v = _graph(G128, lambda a: np.full_like(a, -0.92))
    w = _graph(G128, lambda a: np.full_like(a, 0.1))
    assert np.max(np.abs(interaction_rhs(w, v, spec).values)) < 1e-12


@pytest.mark.parametrize("spec", [QuadratureSpec(), GRID_SPEC], ids=["adaptive", "grid"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_interaction_linearization(spec, k):
    # ρ̄ = 1 corresponds to Δρ = 4π, whose linear rate is (Δρ/2)|k| = 2πk
    u = _graph(G128, lambda a: EPS * np.cos(k * a))
    ref = -2 * np.pi * k * u.values
    got = interaction_rhs(u, u, spec).values
    assert np.max(np.abs(got - ref)) <= 5 * EPS * np.max(np.abs(ref))


def test_two_phase_trivial():
    f = _graph(G128, lambda a: np.full_like(a, 0.1))
    g = _graph(G128, lambda a: np.full_like(a, -0.92))
    ft, gt = two_phase_rhs(TwoPhaseState(f, g, 20 * np.pi, np.pi / 20))
    assert max(np.abs(ft.values).max(), np.abs(gt.values).max()) < 1e-10
    st = paper_two_phase_state(G128)
    ft, gt = two_phase_rhs(TwoPhaseState(st.f, st.g, 0.0, 0.0))
    assert not ft.values.any() and not gt.values.any()


def test_two_phase_paper_data_direction():
    st = paper_two_phase_state(PeriodicGrid.uniform_grid(256))
    ft, gt = two_phase_rhs(st)
    assert np.all(np.isfinite(ft.values)) and np.all(np.isfinite(gt.values))
    a = st.grid.alphas
    # the flank of the lower bump facing the dip of f moves up, and the
    # gap between the interfaces closes there
    M2, r2 = PAPER_TWO_PHASE["M2"], PAPER_TWO_PHASE["r2"]
    flank = (a > M2) & (a < M2 + r2)
    assert gt.values[flank].max() > 100.0
    assert (ft.values - gt.values)[flank].min() < -100.0


def test_two_phase_state_ordering():
    f = _graph(G128, lambda a: np.full_like(a, 0.1))
    g = _graph(G128, lambda a: 0.2 * np.cos(a))
    with pytest.raises(NearTouchingError):
        TwoPhaseState(f, g, 1.0, 1.0)


def test_two_phase_mean_free():
    st = paper_two_phase_state(PeriodicGrid.uniform_grid(256))
    ft, gt = two_phase_rhs(st)
    for v in (ft.values, gt.values):
        assert abs(v.mean()) < 1e-5 * np.abs(v).max()


def test_two_phase_decoupled_reduces_to_single():
    rng = np.random.default_rng(5)
    f = GraphInterface(random_trig(G128, 5, rng, 0.1) + np.ones(128))
    g = GraphInterface(random_trig(G128, 5, rng, 0.1) + np.full(128, -1.0))
    ft, _ = two_phase_rhs(TwoPhaseState(f, g, 2.0, 0.0))
    assert np.array_equal(ft.values, 2.0 * interaction_rhs(f, f).values)


def test_translation_equivariance():
    rng = np.random.default_rng(11)
    f = random_trig(G128, 6, rng, 0.2)
    shift = 7
    g = PeriodicField(G128, np.roll(f.values, shift))
    r0 = interaction_rhs(GraphInterface(f), GraphInterface(f)).values
    r1 = interaction_rhs(GraphInterface(g), GraphInterface(g)).values
    assert np.max(np.abs(np.roll(r0, shift) - r1)) < 1e-8


def test_contour_flat():
    v1, v2 = contour_rhs_periodic(Curve.flat(G128))
    assert max(np.abs(v1.values).max(), np.abs(v2.values).max()) < 1e-12


def test_contour_linearization():
    u = _graph(G128, lambda a: EPS * np.cos(a))
    v1, v2 = contour_rhs_periodic(u.to_curve(4 * np.pi))
    ref = -2 * np.pi * u.values
    assert np.max(np.abs(v2.values - ref)) <= 5 * EPS * np.max(np.abs(ref))
    assert np.max(np.abs(v1.values)) < 10 * EPS**2


def test_contour_parity():
    rng = np.random.default_rng(2)
    a = G128.alphas
    c1, c2 = rng.normal(size=3) * [0.1, 0.05, 0.02], rng.normal(size=3) * [0.3, 0.1, 0.05]
    p = sum(c1[j] * np.sin((j + 1) * a) for j in range(3))
    z2 = sum(c2[j] * np.sin((j + 1) * a) for j in range(3))
    curve = Curve(PeriodicField(G128, p), PeriodicField(G128, z2))
    v1, v2 = contour_rhs_periodic(curve)
    # node j mirrors to node n − j (node 0 is −π ≡ π)
    mirror = (-np.arange(128)) % 128
    for v in (v1.values, v2.values):
        assert np.max(np.abs(v + v[mirror])) < 1e-8 * max(1.0, np.abs(v).max())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kernel_forms_agree(seed):
    # cosh/cos contour form against ρ̄ I[f, f] with ρ̄ = Δρ/(4π)
    rng = np.random.default_rng(seed)
    f = GraphInterface(random_trig(G128, 6, rng, 0.3))
    dr = 4 * np.pi * rng.uniform(0.5, 2.0)
    _, v2 = contour_rhs_periodic(f.to_curve(dr))
    ref = dr / (4 * np.pi) * interaction_rhs(f, f).values
    assert np.max(np.abs(v2.values - ref)) < 1e-8


def test_contour_velocity_at_matches_nodes():
    rng = np.random.default_rng(8)
    curve = Curve(random_trig(G128, 4, rng, 0.05), random_trig(G128, 4, rng, 0.2))
    # the grid rule and the pointwise evaluator both use the trigonometric interpolant
    _, v2 = contour_rhs_periodic(curve, GRID_SPEC)
    idx = np.array([3, 40, 99])
    pts = contour_velocity_at(curve, G128.alphas[idx])
    assert np.allclose(pts[1], v2.values[idx], atol=1e-10)


def test_dalpha_velocity1_flat():
    assert abs(dalpha_velocity1(Curve.flat(G128), 0.7)) < 1e-12


def test_dalpha_velocity1_symmetric_crest():
    u = _graph(G128, lambda a: EPS * np.cos(a))
    assert abs(dalpha_velocity1(u.to_curve(4 * np.pi), 0.0)) < 10 * EPS**2


def test_dalpha_velocity1_against_finite_difference():
    rng = np.random.default_rng(4)
    curve = Curve(random_trig(G128, 3, rng, 0.05), random_trig(G128, 3, rng, 0.2))
    h = 1e-4
    v1 = contour_velocity_at(curve, np.array([0.5 - h, 0.5 + h]))[0]
    fd = (v1[1] - v1[0]) / (2 * h)
    assert dalpha_velocity1(curve, 0.5) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_dalpha_velocity1_gate():
    c = Curve.from_functions(G128, lambda a: -np.sin(a), lambda a: np.sin(a) * (np.cos(a) - np.cos(1.0)))
    with pytest.raises(UseReducidaError):
        dalpha_velocity1(c, 0.0)


def test_realline_flat():
    g = RealLineGraph.from_function(20.0, 257, np.zeros_like)
    assert np.max(np.abs(graph_rhs_realline(g))) == 0.0


def test_realline_bump_crest_descends():
    bump = lambda x: np.where(np.abs(x) < 1, 0.1 * np.cos(np.pi * x / 2) ** 4, 0.0)
    coarse = RealLineGraph.from_function(20.0, 401, bump)
    fine = RealLineGraph.from_function(20.0, 1601, bump)
    rc = graph_rhs_realline(coarse)[200]
    rf = graph_rhs_realline(fine)[800]
    assert rc < 0 and rf < 0
    assert rc == pytest.approx(rf, rel=1e-5)


def _lambda_gaussian(x):
    # Λ e^{−x²} through its Fourier integral
    return quad(lambda k: k * np.sqrt(np.pi) * np.exp(-k * k / 4) * np.cos(k * x), 0, np.inf, epsabs=1e-14)[0] / np.pi


def test_realline_linearization():
    g = RealLineGraph.from_function(20.0, 401, lambda x: EPS * np.exp(-(x**2)))
    r = graph_rhs_realline(g, 4 * np.pi)
    idx = np.where(np.abs(g.x) < 3)[0][::4]
    ref = np.array([-2 * np.pi * EPS * _lambda_gaussian(g.x[i]) for i in idx])
    assert np.max(np.abs(r[idx] - ref)) < 1e-5 * np.max(np.abs(ref))


def test_realline_truncation_warning():
    g = RealLineGraph.from_function(4.0, 101, lambda x: np.exp(-(x**2) / 8))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        graph_rhs_realline(g)
    assert any(issubclass(w.category, TruncationWarning) for w in caught)
