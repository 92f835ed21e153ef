"""Adaptive time integration, node redistribution and the Galerkin backend.

Every evolution problem is wrapped in a small *problem* object that knows
how to flatten its state into a vector, evaluate the velocity, and post-process
an accepted step (node redistribution, geometric monitors).  :func:`integrate`
drives any of them with the Dormand-Prince 5(4) pair and records failures in
the returned :class:`Trajectory` instead of raising.
"""

from __future__ import annotations

import dataclasses
import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .curve import (
    DELTA_RHO_DEFAULT,
    TWO_PI,
    Curve,
    GraphInterface,
    PeriodicField,
    PeriodicGrid,
    arc_chord_constant,
    min_slope,
)
from .dynamics import (
    RealLineGraph,
    TwoPhaseState,
    contour_rhs_periodic,
    graph_rhs_realline,
    interaction_rhs,
    two_phase_rhs,
)
from .errors import (
    AliasingError,
    ArcChordViolation,
    ConfigError,
    QuadratureNonconvergence,
)
from .quadrature import DEFAULT_SPEC, QuadratureSpec
from .spline import PeriodicSpline, spline_periodic

__all__ = [
    "StepController",
    "StepResult",
    "dopri54_step",
    "spline_periodic",
    "RedistributionPolicy",
    "monitor_density",
    "redistribute",
    "galerkin_rhs",
    "project",
    "Termination",
    "StepRecord",
    "Trajectory",
    "ODEProblem",
    "GraphProblem",
    "TwoPhaseProblem",
    "ContourProblem",
    "GalerkinProblem",
    "RealLineProblem",
    "integrate",
]


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class StepController:
    """Error-control parameters for :func:`dopri54_step`."""

    rtol: float = 1e-8
    atol: float = 1e-10
    dt_init: float = 1e-6
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    safety: float = 0.9
    max_rejects_per_step: int = 20
    fac_min: float = 0.2
    fac_max: float = 5.0

    def __post_init__(self):
        if not (0.0 < self.dt_min < self.dt_init <= self.dt_max):
            raise ConfigError("need 0 < dt_min < dt_init <= dt_max", "StepController")
        if not (0.0 < self.safety < 1.0):
            raise ConfigError("safety must lie in (0, 1)", "StepController")
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ConfigError("rtol and atol must be positive", "StepController")
        if self.max_rejects_per_step < 1:
            raise ConfigError("max_rejects_per_step must be at least 1", "StepController")


class StepResult(NamedTuple):
    state: np.ndarray
    t: float
    dt_next: float
    accepted: bool
    err_est: float


def dopri54_step(rhs: Callable, y, t: float, dt: float, ctrl: StepController, k1=None) -> StepResult:
    """Attempt one Dormand-Prince 5(4) step of size ``dt``.

    ``rhs(t, y)`` returns dy/dt as an array shaped like ``y``.  The error
    estimate is max |y₅ − y₄| / (atol + rtol·max(|y|, |y₅|)); the step is
    accepted when it is at most 1.  A rejected step returns the input state
    and time unchanged together with a reduced ``dt_next``.
    """
    y = np.asarray(y, dtype=float)
    k = np.empty((7,) + y.shape)
    k[0] = rhs(t, y) if k1 is None else k1
    for s in range(1, 7):
        ys = y + dt * np.tensordot(_A[s], k[:s], axes=1)
        k[s] = rhs(t + _C[s] * dt, ys)
    y5 = ys  # stage 7 is evaluated at the fifth-order solution
    delta = dt * np.tensordot(_E, k, axes=1)
    scale = ctrl.atol + ctrl.rtol * np.maximum(np.abs(y), np.abs(y5))
    err = float(np.max(np.abs(delta) / scale)) if y.size else 0.0
    if not np.isfinite(err):
        return StepResult(y, t, max(ctrl.dt_min, dt * ctrl.fac_min), False, np.inf)
    if err == 0.0:
        fac = ctrl.fac_max
    else:
        fac = min(ctrl.fac_max, max(ctrl.fac_min, ctrl.safety * err ** (-0.2)))
    if err <= 1.0:
        dt_next = min(ctrl.dt_max, max(ctrl.dt_min, dt * fac))
        return StepResult(y5, t + dt, dt_next, True, err)
    dt_next = max(ctrl.dt_min, dt * min(1.0, fac))
    return StepResult(y, t, dt_next, False, err)


# ---------------------------------------------------------------------------
# node redistribution


@dataclass(frozen=True)
class RedistributionPolicy:
    """Monitor weights and node-growth policy for graph problems.

    The monitor is sqrt(1 + f'²)(1 + c_kappa·|κ|).  For equidistribution it
    is floored at max/``max_ratio``, which bounds the ratio of largest to
    smallest cell: the upper interface of a two-phase run is stiff, and the
    stable step shrinks with the smallest cell.  Nodes are moved only if
    some node would shift by more than ``min_shift`` mean cells.  The node
    count grows by ``growth`` when the raw monitor's peak-to-median ratio
    exceeds ``peak_ratio``, at most up to ``max_nodes``.
    """

    enabled: bool = True
    c_kappa: float = 1.0
    growth: float = 1.5
    peak_ratio: float = 10.0
    max_nodes: int = 2048
    min_shift: float = 0.05
    oversample: int = 16
    max_ratio: float = 4.0


def _graph_monitor(spline: PeriodicSpline, x, c_kappa: float):
    _, d1, d2 = spline.evaluate_all(x)
    speed = np.sqrt(1.0 + d1 * d1)
    kappa = d2 / speed**3
    return speed * (1.0 + c_kappa * np.abs(kappa))


def monitor_density(state, c_kappa: float = 1.0, samples: int = 4096):
    """Sample the redistribution monitor on a uniform probe grid.

    For a :class:`TwoPhaseState` the monitors of both graphs are averaged.
    Returns (x, m).
    """
    graphs = _graphs_of(state)
    x = -np.pi + TWO_PI * np.arange(samples) / samples
    m = np.zeros(samples)
    for g in graphs:
        m += _graph_monitor(spline_periodic(g.f), x, c_kappa)
    return x, m / len(graphs)


def _graphs_of(state):
    if isinstance(state, GraphInterface):
        return [state]
    if isinstance(state, TwoPhaseState):
        return [state.f, state.g]
    raise TypeError(f"cannot redistribute a {type(state).__name__}")


def _resample(g: GraphInterface, grid: PeriodicGrid) -> GraphInterface:
    """Spline resample onto ``grid``, shifted so the period integral is unchanged."""
    s = spline_periodic(g.f)
    vals = s(grid.alphas)
    new = PeriodicField(grid, vals)
    shift = g.f.mean() - new.mean()
    return GraphInterface(PeriodicField(grid, vals + shift), mean=g.mean)


def redistribute(state, policy: RedistributionPolicy = RedistributionPolicy(), grow_above: Optional[float] = None):
    """Move the nodes of a graph (or a pair of graphs) to equidistribute the monitor.

    The first node stays at −π.  New values come from the periodic spline
    and are shifted by a constant so that the mean height is conserved.
    ``grow_above`` overrides ``policy.peak_ratio`` as the growth threshold.
    Returns the input unchanged when no node would move appreciably.
    """
    graphs = _graphs_of(state)
    grid = graphs[0].grid
    n = grid.n
    M = max(policy.oversample * n, 1024)
    x, m = monitor_density(state, policy.c_kappa, samples=M)
    if not np.all(np.isfinite(m)):
        raise ArcChordViolation("redistribution monitor is not finite")

    threshold = policy.peak_ratio if grow_above is None else grow_above
    ratio = float(m.max() / np.median(m))
    n_new = n
    if ratio > threshold and n < policy.max_nodes:
        n_new = min(policy.max_nodes, int(np.ceil(policy.growth * n)))

    m = np.maximum(m, m.max() / policy.max_ratio)
    # cumulative monitor on [−π, π], trapezoid on the periodic probe grid
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (m + np.roll(m, -1)))]) * (TWO_PI / M)
    xs = np.append(x, np.pi)
    targets = cum[-1] * np.arange(n_new) / n_new
    alphas = np.interp(targets, cum, xs)
    alphas[0] = -np.pi

    if n_new == n:
        shift = np.max(np.abs(alphas - grid.alphas)) / (TWO_PI / n)
        if shift < policy.min_shift:
            return state
    uniform_nodes = -np.pi + TWO_PI * np.arange(n_new) / n_new
    if np.max(np.abs(alphas - uniform_nodes)) < 1e-12:
        new_grid = PeriodicGrid.uniform_grid(n_new)
    else:
        new_grid = PeriodicGrid(alphas)
    new = [_resample(g, new_grid) for g in graphs]
    if isinstance(state, GraphInterface):
        return new[0]
    return TwoPhaseState(new[0], new[1], state.rho_bar_1, state.rho_bar_2)


# ---------------------------------------------------------------------------
# Galerkin backend


def galerkin_rhs(curve: Curve, N: int, spec: QuadratureSpec = DEFAULT_SPEC):
    """Fourier coefficients (k = −N..N) of Π_N applied to the contour velocity.

    The velocity is evaluated by collocation on the curve's uniform grid,
    which must have at least 4N nodes so the quadratic terms are not aliased.
    Returns (A₁, A₂) for the two components; the z₁ component refers to
    z₁(α) − α, whose velocity is the same.
    """
    if not curve.grid.uniform:
        raise AliasingError("Galerkin evaluation needs a uniform grid")
    if curve.n < 4 * N:
        raise AliasingError(f"{curve.n} nodes cannot carry a Galerkin truncation at N = {N} (need {4 * N})")
    v1, v2 = contour_rhs_periodic(curve, spec)
    return v1.coefficients(N), v2.coefficients(N)


def project(values: np.ndarray, N: int) -> np.ndarray:
    """Π_N of nodal values on a uniform grid."""
    n = values.shape[-1]
    F = np.fft.fft(values, axis=-1)
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    F[..., k > N] = 0.0
    return np.fft.ifft(F, axis=-1).real


# ---------------------------------------------------------------------------
# trajectories


class Termination(str, enum.Enum):
    REACHED_T_END = "reached_t_end"
    TURNOVER_DETECTED = "turnover_detected"
    STEP_COLLAPSE = "step_collapse"
    ARC_CHORD_FAILURE = "arc_chord_failure"
    QUADRATURE_FAILURE = "quadrature_failure"


@dataclass
class StepRecord:
    t: float
    dt: float
    err: float
    accepted: bool
    nodes: int


@dataclass
class Trajectory:
    """Snapshots, per-attempt telemetry and the reason the run stopped.

    ``final`` is the last accepted (t, state); ``events`` collects warnings
    raised while evaluating the problem as (t, message) pairs.
    ``interrupted`` marks a run cut short by ``max_steps``.
    """

    problem: str
    snapshots: list = field(default_factory=list)
    telemetry: list = field(default_factory=list)
    termination: Optional[Termination] = None
    detail: str = ""
    final: Optional[tuple] = None
    events: list = field(default_factory=list)
    interrupted: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def accepted_steps(self) -> list:
        return [r for r in self.telemetry if r.accepted]


# ---------------------------------------------------------------------------
# problems


class ODEProblem:
    """y' = f(t, y) for a plain numpy state."""

    kind = "ode"

    def __init__(self, f: Callable):
        self.f = f

    def pack(self, state):
        return np.asarray(state, dtype=float)

    def unpack(self, y, like):
        return np.array(y)

    def rhs(self, t, state):
        return np.asarray(self.f(t, state), dtype=float)

    def after_step(self, t, state):
        return state, None


def _zero_mean(values: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Remove the period mean (exact spline integral) from a velocity field."""
    return values - PeriodicField(grid, values).mean()


class GraphProblem:
    """A single periodic graph, f_t = ρ̄ I[f, f] with ρ̄ = Δρ/(4π).

    Every interaction integral has zero period mean, so with
    ``conserve_mean`` the discretisation's residual mean is removed from the
    velocity before it is used.
    """

    kind = "graph"

    def __init__(self, delta_rho: float = DELTA_RHO_DEFAULT, spec: QuadratureSpec = DEFAULT_SPEC,
                 policy: RedistributionPolicy = RedistributionPolicy(), conserve_mean: bool = True):
        self.rho_bar = delta_rho / (4.0 * np.pi)
        self.spec = spec
        self.policy = policy
        self.conserve_mean = conserve_mean
        self._grow_above = None

    def get_internal(self) -> dict:
        """Mutable controller state, for checkpoints."""
        return {"grow_above": self._grow_above}

    def set_internal(self, d: dict) -> None:
        self._grow_above = d.get("grow_above")

    def _spec_for(self, grid):
        if self.spec.method == "grid" and not grid.uniform:
            return dataclasses.replace(self.spec, method="adaptive")
        return self.spec

    def pack(self, state: GraphInterface):
        return state.values.copy()

    def unpack(self, y, like: GraphInterface):
        return GraphInterface(PeriodicField(like.grid, y), mean=like.mean)

    def rhs(self, t, state: GraphInterface):
        v = self.rho_bar * interaction_rhs(state, state, self._spec_for(state.grid)).values
        return _zero_mean(v, state.grid) if self.conserve_mean else v

    def after_step(self, t, state):
        if not self.policy.enabled:
            return state, None
        if self._grow_above is None:
            # grow only once the monitor sharpens beyond its initial contrast
            _, m = monitor_density(state, self.policy.c_kappa)
            ratio = float(m.max() / np.median(m))
            self._grow_above = max(self.policy.peak_ratio, self.policy.growth * ratio)
        new = redistribute(state, self.policy, self._grow_above)
        if new.grid.n > state.grid.n:
            self._grow_above *= self.policy.growth
        return new, None


class TwoPhaseProblem(GraphProblem):
    """Two graphs f above g, coupled through the interaction integrals."""

    kind = "two-phase"

    def __init__(self, spec: QuadratureSpec = DEFAULT_SPEC, policy: RedistributionPolicy = RedistributionPolicy(),
                 conserve_mean: bool = True):
        super().__init__(spec=spec, policy=policy, conserve_mean=conserve_mean)

    def pack(self, state: TwoPhaseState):
        return np.concatenate([state.f.values, state.g.values])

    def unpack(self, y, like: TwoPhaseState):
        n = like.grid.n
        f = GraphInterface(PeriodicField(like.grid, y[:n]), mean=like.f.mean)
        g = GraphInterface(PeriodicField(like.grid, y[n:]), mean=like.g.mean)
        return TwoPhaseState(f, g, like.rho_bar_1, like.rho_bar_2)

    def rhs(self, t, state: TwoPhaseState):
        ft, gt = two_phase_rhs(state, self._spec_for(state.grid))
        ft, gt = ft.values, gt.values
        if self.conserve_mean:
            ft, gt = _zero_mean(ft, state.grid), _zero_mean(gt, state.grid)
        return np.concatenate([ft, gt])


class ContourProblem:
    """Periodic contour z(α) = (α + p(α), z₂(α)) on a uniform grid.

    ``direction = −1`` runs the equation backward in time.  After each step
    the arc-chord constant is checked; with ``stop_on_turnover`` the run ends
    as soon as ∂_α z₁ turns negative somewhere.
    """

    kind = "contour"

    def __init__(self, spec: QuadratureSpec = DEFAULT_SPEC, direction: int = 1,
                 stop_on_turnover: bool = False, check_arc_chord: bool = True):
        if direction not in (1, -1):
            raise ConfigError("direction must be +1 or -1", "ContourProblem")
        self.spec = spec
        self.direction = direction
        self.stop_on_turnover = stop_on_turnover
        self.check_arc_chord = check_arc_chord

    def pack(self, state: Curve):
        return np.concatenate([state.z1_minus_alpha.values, state.z2.values])

    def unpack(self, y, like: Curve):
        n = like.n
        return Curve(PeriodicField(like.grid, y[:n]), PeriodicField(like.grid, y[n:]), like.delta_rho)

    def rhs(self, t, state: Curve):
        v1, v2 = contour_rhs_periodic(state, self.spec)
        return self.direction * np.concatenate([v1.values, v2.values])

    def after_step(self, t, state: Curve):
        if self.check_arc_chord:
            arc_chord_constant(state)
        if self.stop_on_turnover:
            s, a = min_slope(state)
            if s < 0.0:
                return state, f"d(alpha) z1 = {s:.3e} < 0 at alpha = {a:.6g}"
        return state, None


class GalerkinProblem(ContourProblem):
    """Contour evolution projected onto Fourier modes |k| ≤ N."""

    kind = "galerkin"

    def __init__(self, N: int, spec: QuadratureSpec = DEFAULT_SPEC, direction: int = 1):
        super().__init__(spec=spec, direction=direction)
        self.N = N

    def pack(self, state: Curve):
        if state.n < 4 * self.N:
            raise AliasingError(f"{state.n} nodes cannot carry a Galerkin truncation at N = {self.N}")
        return project(super().pack(state).reshape(2, -1), self.N).ravel()

    def rhs(self, t, state: Curve):
        A1, A2 = galerkin_rhs(state, self.N, self.spec)
        grid = state.grid
        v1 = PeriodicField.from_coefficients(grid, A1).values
        v2 = PeriodicField.from_coefficients(grid, A2).values
        return self.direction * np.concatenate([v1, v2])


class RealLineProblem:
    """Graph on the real line truncated to [−L, L]."""

    kind = "realline"

    def __init__(self, delta_rho: float = DELTA_RHO_DEFAULT, spec: QuadratureSpec = DEFAULT_SPEC):
        self.delta_rho = delta_rho
        self.spec = spec

    def pack(self, state: RealLineGraph):
        return state.values.copy()

    def unpack(self, y, like: RealLineGraph):
        return RealLineGraph(like.L, y)

    def rhs(self, t, state: RealLineGraph):
        return graph_rhs_realline(state, self.delta_rho, self.spec)

    def after_step(self, t, state):
        return state, None


# ---------------------------------------------------------------------------
# driver


def _record_warnings(traj: Trajectory, t: float, caught) -> None:
    seen = {m for _, m in traj.events}
    for w in caught:
        msg = f"{w.category.__name__}: {w.message}"
        if msg not in seen:
            traj.events.append((t, msg))
            seen.add(msg)


def integrate(
    problem,
    state,
    ctrl: StepController = StepController(),
    snapshot_times: Optional[Sequence[float]] = None,
    t_end: Optional[float] = None,
    hooks: Sequence[Callable] = (),
    t0: float = 0.0,
    max_steps: Optional[int] = None,
    step_hooks: Sequence[Callable] = (),
) -> Trajectory:
    """Advance ``state`` from ``t0`` with adaptive DOPRI5(4) steps.

    Steps are shortened to land exactly on every requested snapshot time.
    With ``snapshot_times=None`` every accepted step is a snapshot.  Each
    hook is called as ``hook(t, state)`` whenever a snapshot is stored.
    ``t_end`` defaults to the last snapshot time.  The run never raises for
    numerical failures; the reason is stored in ``Trajectory.termination``.
    Each step hook is called as ``hook(traj, t, state, dt_next)`` after
    every accepted step; ``dt_next`` is the step the controller will try next, so
    a run restarted from (t, state) with ``dt_init = dt_next`` repeats the
    same step sequence.
    """
    if snapshot_times is not None:
        snaps = np.array(sorted(set(float(s) for s in snapshot_times)))
        if snaps.size and snaps[0] < t0:
            raise ConfigError("snapshot times precede the initial time", "snapshot_times")
    else:
        snaps = None
    if t_end is None:
        if snaps is None or snaps.size == 0:
            raise ConfigError("need t_end or snapshot times", "integrate")
        t_end = float(snaps[-1])
    if t_end < t0:
        raise ConfigError("t_end precedes the initial time", "t_end")

    traj = Trajectory(problem.kind)
    t = t0
    pending = list(snaps[snaps > t0]) if snaps is not None else []
    if pending and pending[-1] > t_end:
        pending = [s for s in pending if s <= t_end]

    def store(t, state):
        traj.snapshots.append((t, state))
        for h in hooks:
            h(t, state)

    if snaps is None or (snaps.size and snaps[0] == t0):
        store(t, state)
    traj.final = (t, state)

    dt = ctrl.dt_init
    rejects = 0
    forced_min = False
    steps = 0
    current = state

    def rhs_vec(tt, y):
        return problem.rhs(tt, problem.unpack(y, current))

    while t < t_end:
        if max_steps is not None and steps >= max_steps:
            traj.termination = Termination.REACHED_T_END
            traj.detail = f"stopped after max_steps={max_steps} at t={t:.6g}"
            traj.interrupted = True
            return traj
        goal = pending[0] if pending else t_end
        dt_try = min(dt, goal - t)
        hit = dt_try >= goal - t
        if (goal - t) - dt_try < 1e-14 * max(1.0, abs(goal)):
            dt_try, hit = goal - t, True
        y = problem.pack(current)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                res = dopri54_step(rhs_vec, y, t, dt_try, ctrl)
                failure = None
            except ArcChordViolation as exc:
                res, failure = None, (Termination.ARC_CHORD_FAILURE, exc)
            except QuadratureNonconvergence as exc:
                res, failure = None, (Termination.QUADRATURE_FAILURE, exc)
        _record_warnings(traj, t, caught)

        if res is None:
            # a trial stage left the admissible set; treat as a rejection
            traj.telemetry.append(StepRecord(t, dt_try, np.inf, False, y.size))
            if dt_try <= ctrl.dt_min * (1.0 + 1e-12):
                traj.termination, exc = failure
                traj.detail = f"{type(exc).__name__} at t={t:.6g}: {exc}"
                return traj
            dt = max(ctrl.dt_min, 0.25 * dt_try)
            rejects += 1
            if rejects > ctrl.max_rejects_per_step:
                dt, forced_min = ctrl.dt_min, True
            continue

        traj.telemetry.append(StepRecord(res.t if res.accepted else t, dt_try, res.err_est, res.accepted, y.size))
        if not res.accepted:
            rejects += 1
            if dt_try <= ctrl.dt_min * (1.0 + 1e-12) or forced_min:
                traj.termination = Termination.STEP_COLLAPSE
                traj.detail = f"step rejected at dt={dt_try:.3e} (floor {ctrl.dt_min:.1e}) at t={t:.9g}, err={res.err_est:.3g}"
                return traj
            dt = res.dt_next
            if rejects > ctrl.max_rejects_per_step:
                dt, forced_min = ctrl.dt_min, True
            continue

        rejects, forced_min = 0, False
        steps += 1
        t_new = goal if hit else res.t
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                new_state = problem.unpack(res.state, current)
                new_state, stop = problem.after_step(t_new, new_state)
            _record_warnings(traj, t_new, caught)
        except ArcChordViolation as exc:
            traj.termination = Termination.ARC_CHORD_FAILURE
            traj.detail = f"{type(exc).__name__} at t={t_new:.6g}: {exc}"
            return traj
        current, t = new_state, t_new
        traj.final = (t, current)
        if snaps is None:
            store(t, current)
        elif hit and pending:
            pending.pop(0)
            store(t, current)
        if stop is not None:
            traj.termination = Termination.TURNOVER_DETECTED
            traj.detail = f"t={t:.9g}: {stop}"
            return traj
        # the controller's proposal survives a shortened snapshot step
        dt = res.dt_next if not hit else max(res.dt_next, dt)
        dt = min(dt, ctrl.dt_max)
        for h in step_hooks:
            h(traj, t, current, dt)

    traj.termination = Termination.REACHED_T_END
    traj.detail = f"t={t:.9g}"
    return traj

