"""Command line interface: simulate, construct-turnover, verify and plot.

Exit codes
    0 success, 2 configuration error, 3 arc-chord failure (including
    near-touching interfaces), 4 step collapse, 5 quadrature failure,
    6 verification failure.  Construction failures of ``construct-turnover``
    use 7 (structural check), 8 (invalid z* family), 9 (no admissible b)
    and 10 (too few smoothing modes).

The environment variable ``MUSKAT_MAX_WORKERS`` caps the number of threads
used by the compiled kernels.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import platform
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .curve import DELTA_RHO_DEFAULT, Curve, GraphInterface, PeriodicField, PeriodicGrid
from .dynamics import PAPER_TWO_PHASE, RealLineGraph, TwoPhaseState, paper_two_phase_state
from .errors import (
    ArcChordViolation,
    ConfigError,
    ConstructionError,
    FamilyInvalidError,
    GridError,
    IncreaseModesError,
    MuskatError,
    QuadratureNonconvergence,
    SearchFailureError,
)
from .evolve import (
    ContourProblem,
    GalerkinProblem,
    GraphProblem,
    RealLineProblem,
    RedistributionPolicy,
    StepController,
    Termination,
    TwoPhaseProblem,
    integrate,
)
from .formats import (
    FORMAT_VERSION,
    TELEMETRY_HEADER,
    file_digest,
    _parse_scalar,
    format_telemetry,
    read_document,
    read_snapshot,
    read_telemetry,
    write_document,
    write_snapshot,
)
from .quadrature import QuadratureSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ARC_CHORD = 3
EXIT_STEP_COLLAPSE = 4
EXIT_QUADRATURE = 5
EXIT_VERIFY = 6
EXIT_CONSTRUCTION = 7
EXIT_FAMILY = 8
EXIT_SEARCH = 9
EXIT_MODES = 10

TERMINATION_EXIT = {
    Termination.REACHED_T_END: EXIT_OK,
    Termination.TURNOVER_DETECTED: EXIT_OK,
    Termination.ARC_CHORD_FAILURE: EXIT_ARC_CHORD,
    Termination.STEP_COLLAPSE: EXIT_STEP_COLLAPSE,
    Termination.QUADRATURE_FAILURE: EXIT_QUADRATURE,
}

WORKERS_ENV = "MUSKAT_MAX_WORKERS"
FIGURE_TIMES = [0.0, 3.46e-4, 7.66e-4, 1.04e-3, 1.84e-3]
PROBLEMS = ("graph", "two-phase", "contour", "galerkin", "realline")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Everything ``simulate`` needs; see :func:`load_config` for the file format."""

    problem: str = "graph"
    initial: str = "flat"
    n: int = 256
    delta_rho: float = DELTA_RHO_DEFAULT
    rho_bar_1: float = PAPER_TWO_PHASE["rho_bar_1"]
    rho_bar_2: float = PAPER_TWO_PHASE["rho_bar_2"]
    L: float = 20.0
    galerkin_modes: int = 0
    direction: int = 1
    stop_on_turnover: bool = False
    redistribute: bool = True
    t_end: float = 1e-3
    snapshot_times: list = field(default_factory=lambda: [0.0, 1e-3])
    seed: int = 0
    checkpoint_every: int = 50
    output_dir: str = "run"
    controller: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)

    def step_controller(self, **override) -> StepController:
        kw = dict(self.controller)
        kw.update(override)
        return StepController(**kw)

    def quadrature_spec(self) -> QuadratureSpec:
        return QuadratureSpec(**self.quadrature)

    def as_document(self) -> dict:
        d = dataclasses.asdict(self)
        d["snapshot_times"] = [float(x) for x in self.snapshot_times]
        return {"kind": "run_config", **d}


_CONTROLLER_KEYS = {f.name for f in dataclasses.fields(StepController)}
_QUADRATURE_KEYS = {f.name for f in dataclasses.fields(QuadratureSpec)}


def preset_defaults(initial: str) -> dict:
    """Defaults implied by the initial-data name."""
    name = initial.split("(")[0].strip()
    if name == "paper-two-phase":
        # uniform trapezoid without redistribution: the adaptive path grows to
        # ~2000 nodes with dt ~ 1e-6 and takes hours on one core
        return {"problem": "two-phase", "n": 512, "snapshot_times": list(FIGURE_TIMES), "t_end": 2.5e-3,
                "redistribute": False, "quadrature": {"method": "grid"}}
    if name == "gaussian":
        # the L² check integrates the dissipation over snapshots, so sample densely
        return {"problem": "realline", "n": 401, "t_end": 0.1,
                "snapshot_times": [round(0.005 * i, 12) for i in range(21)],
                "controller": {"rtol": 1e-10, "atol": 1e-12}}
    return {}


def _coerce(key: str, value, where: str):
    """Type-check one configuration entry against the RunConfig field."""
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if key not in types:
        raise ConfigError(f"unknown field {key!r}", where)
    kind = types[key]
    try:
        if kind == "int":
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false"):
                    raise ValueError
                return value.lower() == "true"
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind == "list":
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = [value]
            if not isinstance(value, list):
                raise ValueError
            return [float(v) for v in value]
        if kind == "dict":
            if not isinstance(value, dict):
                raise ValueError
            allowed = _CONTROLLER_KEYS if key == "controller" else _QUADRATURE_KEYS
            bad = set(value) - allowed
            if bad:
                raise ConfigError(f"unknown {key} setting(s) {sorted(bad)}", where)
            return dict(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {key!r} expects {kind}, got {value!r}", where) from exc


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", "--set")
        key, value = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, sub = key.split(".", 1)
            out.setdefault(section, {})[sub] = _parse_scalar(value)
        else:
            out[key] = _parse_scalar(value)
    return out


def load_config(path: Optional[str] = None, initial: Optional[str] = None, overrides=None) -> RunConfig:
    """Merge preset defaults, the config file and ``--set`` overrides, then validate.

    The file is a key-value document (see :mod:`muskat.formats`); errors
    name the file, line and field.
    """
    doc, source = {}, "<defaults>"
    lines = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError("config file not found", path)
        doc = read_document(path)
        lines = doc.lines
        source = path
    sets = _parse_set(overrides)
    init = initial or sets.get("initial") or doc.get("initial") or "flat"
    merged = dict(preset_defaults(str(init)))
    merged["initial"] = init
    where = {}
    for key, value in doc.items():
        if key in ("format_version", "kind"):
            continue
        where[key] = f"{source}:{lines.get(key, '?')} ({key})"
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    for key, value in sets.items():
        where[key] = f"--set {key}"
        if isinstance(value, dict):
            merged[key] = {**merged.get(key, {}), **value}
        else:
            merged[key] = value
    if initial:
        merged["initial"] = initial
    kw = {k: _coerce(k, v, where.get(k, k)) for k, v in merged.items()}
    cfg = RunConfig(**kw)
    validate_config(cfg, where)
    return cfg


def validate_config(cfg: RunConfig, where: Optional[dict] = None) -> None:
    where = where or {}

    def fail(key, msg):
        raise ConfigError(msg, where.get(key, key))

    if cfg.problem not in PROBLEMS:
        fail("problem", f"problem must be one of {PROBLEMS}")
    if cfg.n < 8:
        fail("n", "n must be at least 8")
    if cfg.t_end <= 0:
        fail("t_end", "t_end must be positive")
    if not cfg.snapshot_times or min(cfg.snapshot_times) < 0 or max(cfg.snapshot_times) > cfg.t_end:
        fail("snapshot_times", "snapshot times must lie in [0, t_end]")
    if len(set(cfg.snapshot_times)) != len(cfg.snapshot_times):
        fail("snapshot_times", "snapshot times must be distinct")
    if cfg.direction not in (1, -1):
        fail("direction", "direction must be 1 or -1")
    if cfg.checkpoint_every < 1:
        fail("checkpoint_every", "checkpoint_every must be at least 1")
    if cfg.L <= 0:
        fail("L", "L must be positive")
    if cfg.problem == "galerkin" and cfg.galerkin_modes and 4 * cfg.galerkin_modes > cfg.n:
        fail("galerkin_modes", "need n >= 4 * galerkin_modes")
    try:
        cfg.step_controller()
    except TypeError as exc:
        fail("controller", str(exc))
    except ConfigError as exc:
        fail("controller", str(exc))
    try:
        cfg.quadrature_spec()
    except (TypeError, ValueError) as exc:
        fail("quadrature", str(exc))
    parse_initial(cfg.initial, where.get("initial", "initial"))


_INITIAL_RE = re.compile(r"^\s*([a-z-]+)\s*(?:\((.*)\))?\s*$")


def parse_initial(desc: str, where: str = "initial"):
    """Split ``name(arg, ...)`` or ``file:PATH`` into (name, args)."""
    if desc.startswith("file:"):
        path = desc[5:]
        if not os.path.exists(path):
            raise ConfigError(f"initial data file {path!r} not found", where)
        return "file", [path]
    m = _INITIAL_RE.match(desc)
    if not m:
        raise ConfigError(f"cannot parse initial data {desc!r}", where)
    name, args = m.group(1), m.group(2)
    try:
        vals = [float(a) for a in args.split(",")] if args and args.strip() else []
    except ValueError as exc:
        raise ConfigError(f"non-numeric argument in {desc!r}", where) from exc
    arity = {"paper-two-phase": (0,), "flat": (0,), "cosine": (0, 1, 2), "gaussian": (0, 1, 2)}
    if name not in arity:
        raise ConfigError(f"unknown initial data {name!r}", where)
    if len(vals) not in arity[name]:
        raise ConfigError(f"wrong number of arguments for {name!r}", where)
    return name, vals


def _periodic_profile(name, args, x):
    if name == "flat":
        return np.zeros_like(x)
    if name == "cosine":
        eps, k = (list(args) + [1e-3, 1.0][len(args):])[:2]
        return eps * np.cos(k * x)
    eps, sigma = (list(args) + [0.1, 1.0][len(args):])[:2]
    return eps * np.exp(-((x / sigma) ** 2))


def build_problem(cfg: RunConfig):
    """(problem, initial state) for a validated configuration."""
    name, args = parse_initial(cfg.initial)
    spec = cfg.quadrature_spec()
    policy = RedistributionPolicy(enabled=cfg.redistribute)
    if name == "paper-two-phase" and cfg.problem != "two-phase":
        raise ConfigError("paper-two-phase initial data needs problem two-phase", "problem")
    if cfg.problem == "two-phase" and name not in ("paper-two-phase", "file"):
        raise ConfigError("two-phase runs take paper-two-phase or file initial data", "initial")
    snap = read_snapshot(args[0]) if name == "file" else None
    if snap is not None:
        grid_alphas = snap.alphas
    if cfg.problem == "realline":
        if name == "cosine":
            raise ConfigError("cosine data does not decay on the real line", "initial")
        if snap is not None:
            L = float(snap.alphas[-1])
            return RealLineProblem(cfg.delta_rho, spec), RealLineGraph(L, snap.columns[0])
        x = np.linspace(-cfg.L, cfg.L, cfg.n)
        return RealLineProblem(cfg.delta_rho, spec), RealLineGraph(cfg.L, _periodic_profile(name, args, x))
    if snap is not None:
        uniform = np.allclose(grid_alphas, PeriodicGrid.uniform_grid(grid_alphas.size).alphas, rtol=0, atol=1e-15)
        grid = PeriodicGrid.uniform_grid(grid_alphas.size) if uniform else PeriodicGrid(grid_alphas)
    else:
        grid = PeriodicGrid.uniform_grid(cfg.n)
    if cfg.problem == "two-phase":
        if snap is not None:
            if snap.columns.shape[0] < 2:
                raise ConfigError("two-phase file needs columns alpha f g", "initial")
            state = TwoPhaseState(
                GraphInterface(PeriodicField(grid, snap.columns[0])),
                GraphInterface(PeriodicField(grid, snap.columns[1])),
                cfg.rho_bar_1,
                cfg.rho_bar_2,
            )
        else:
            params = dict(PAPER_TWO_PHASE, rho_bar_1=cfg.rho_bar_1, rho_bar_2=cfg.rho_bar_2)
            state = paper_two_phase_state(grid, params)
        return TwoPhaseProblem(spec, policy), state
    if cfg.problem == "graph":
        vals = snap.columns[0] if snap is not None else _periodic_profile(name, args, grid.alphas)
        return GraphProblem(cfg.delta_rho, spec, policy), GraphInterface(PeriodicField(grid, vals))
    # contour and galerkin
    if snap is not None:
        if snap.columns.shape[0] < 2:
            raise ConfigError("contour file needs columns alpha z1-alpha z2", "initial")
        curve = Curve(PeriodicField(grid, snap.columns[0]), PeriodicField(grid, snap.columns[1]), cfg.delta_rho)
    else:
        curve = Curve(PeriodicField(grid, np.zeros(grid.n)), PeriodicField(grid, _periodic_profile(name, args, grid.alphas)),
                      cfg.delta_rho)
    if cfg.problem == "galerkin":
        N = cfg.galerkin_modes or grid.n // 4
        return GalerkinProblem(N, spec, cfg.direction), curve
    return ContourProblem(spec, cfg.direction, stop_on_turnover=cfg.stop_on_turnover), curve


# ---------------------------------------------------------------------------
# snapshots and checkpoints


def state_columns(state):
    """(alphas, columns...) of a state as written to snapshot files."""
    if isinstance(state, TwoPhaseState):
        return state.grid.alphas, state.f.values, state.g.values
    if isinstance(state, GraphInterface):
        return state.grid.alphas, state.values
    if isinstance(state, Curve):
        return state.grid.alphas, state.z1_minus_alpha.values, state.z2.values
    if isinstance(state, RealLineGraph):
        return state.x, state.values
    raise TypeError(f"cannot serialize {type(state).__name__}")


def snapshot_name(index: int) -> str:
    return f"snapshot_{index:03d}.txt"


def save_checkpoint(path: Path, problem, state, t: float, dt_next: float, telemetry_rows: int) -> None:
    cols = state_columns(state)
    extra = {}
    if isinstance(state, TwoPhaseState):
        extra = {"means": np.array([state.f.mean, state.g.mean]), "rho_bars": np.array([state.rho_bar_1, state.rho_bar_2])}
    elif isinstance(state, GraphInterface):
        extra = {"means": np.array([state.mean])}
    elif isinstance(state, Curve):
        extra = {"delta_rho": np.array([state.delta_rho])}
    elif isinstance(state, RealLineGraph):
        extra = {"L": np.array([state.L])}
    internal = getattr(problem, "get_internal", lambda: {})()
    grow = internal.get("grow_above")
    uniform = bool(getattr(getattr(state, "grid", None), "uniform", False))
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(
        tmp,
        kind=np.array(problem.kind),
        t=np.array([t]),
        dt_next=np.array([dt_next]),
        alphas=cols[0],
        columns=np.vstack(cols[1:]),
        uniform=np.array([uniform]),
        grow_above=np.array([np.nan if grow is None else grow]),
        telemetry_rows=np.array([telemetry_rows]),
        **extra,
    )
    os.replace(tmp, path)


def load_checkpoint(path: Path, problem, like):
    """(state, t, dt_next, telemetry_rows) from a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as z:
        if str(z["kind"]) != problem.kind:
            raise ConfigError(f"checkpoint holds a {z['kind']} run", str(path))
        alphas, cols = z["alphas"], z["columns"]
        t, dt = float(z["t"][0]), float(z["dt_next"][0])
        rows = int(z["telemetry_rows"][0])
        grow = float(z["grow_above"][0])
        if hasattr(problem, "set_internal"):
            problem.set_internal({"grow_above": None if np.isnan(grow) else grow})
        if isinstance(like, RealLineGraph):
            return RealLineGraph(float(z["L"][0]), cols[0]), t, dt, rows
        grid = PeriodicGrid.uniform_grid(alphas.size) if bool(z["uniform"][0]) else PeriodicGrid(alphas)
        if isinstance(like, TwoPhaseState):
            m = z["means"]
            rb = z["rho_bars"]
            state = TwoPhaseState(
                GraphInterface(PeriodicField(grid, cols[0]), mean=float(m[0])),
                GraphInterface(PeriodicField(grid, cols[1]), mean=float(m[1])),
                float(rb[0]),
                float(rb[1]),
            )
        elif isinstance(like, GraphInterface):
            state = GraphInterface(PeriodicField(grid, cols[0]), mean=float(z["means"][0]))
        else:
            state = Curve(PeriodicField(grid, cols[0]), PeriodicField(grid, cols[1]), float(z["delta_rho"][0]))
    return state, t, dt, rows


def _versions() -> dict:
    import scipy

    try:
        import numba

        nb = numba.__version__
    except ImportError:  # pragma: no cover
        nb = "unavailable"
    return {
        "muskat": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": nb,
    }


def apply_worker_cap() -> None:
    cap = os.environ.get(WORKERS_ENV)
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer", WORKERS_ENV)
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover
        pass


def write_manifest(out: Path, extra: dict) -> None:
    files = {}
    for p in sorted(out.iterdir()):
        if p.is_file() and p.name != "manifest.txt" and not p.name.endswith(".tmp.npz"):
            files[p.name] = "sha256:" + file_digest(p)
    doc = {"kind": "run_manifest", **extra, "versions": _versions(), "files": files}
    write_document(out / "manifest.txt", doc)


def run_simulation(cfg: RunConfig, out: Path, resume: bool = False, max_steps: Optional[int] = None, log=None):
    """Run ``cfg`` writing snapshots, telemetry, checkpoint and manifest into ``out``.

    Returns the :class:`~muskat.evolve.Trajectory` of this invocation.
    """
    problem, state = build_problem(cfg)
    ctrl = cfg.step_controller()
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.npz"
    tele = out / "telemetry.txt"
    t0 = 0.0
    if resume:
        if not ckpt.exists():
            raise ConfigError("no checkpoint to resume from", str(ckpt))
        state, t0, dt_next, rows = load_checkpoint(ckpt, problem, state)
        ctrl = cfg.step_controller(dt_init=min(max(dt_next, ctrl.dt_min * 1.000001), ctrl.dt_max))
        # drop telemetry written after the checkpoint
        kept = read_telemetry(tele)[:rows] if tele.exists() else np.zeros((0, 5))
        with open(tele, "w") as fh:
            fh.write(TELEMETRY_HEADER + "\n")
            for r in kept:
                fh.write("%.17g %.17g %.17g %d %d\n" % (r[0], r[1], r[2], int(r[3]), int(r[4])))
        tele_rows = rows
    else:
        write_document(out / "config.txt", cfg.as_document())
        with open(tele, "w") as fh:
            fh.write(TELEMETRY_HEADER + "\n")
        tele_rows = 0
    times = np.array(sorted(cfg.snapshot_times))
    flushed = {"n": 0, "rows": tele_rows}

    def write_snap(t, st):
        idx = int(np.argmin(np.abs(times - t)))
        write_snapshot(out / snapshot_name(idx), t, problem.kind, *state_columns(st))
        if log:
            log(f"snapshot t={t:.6g}")

    def flush(traj):
        new = traj.telemetry[flushed["n"]:]
        with open(tele, "a") as fh:
            fh.write(format_telemetry(new))
        flushed["n"] = len(traj.telemetry)
        flushed["rows"] += len(new)

    accepted = {"n": 0, "dt": ctrl.dt_init}

    def checkpoint(traj, t, st, dt_next):
        accepted["n"] += 1
        accepted["dt"] = dt_next
        if accepted["n"] % cfg.checkpoint_every == 0:
            flush(traj)
            save_checkpoint(ckpt, problem, st, t, dt_next, flushed["rows"])

    traj = integrate(problem, state, ctrl, snapshot_times=[s for s in times if s >= t0], t_end=cfg.t_end,
                     hooks=[write_snap], t0=t0, max_steps=max_steps, step_hooks=[checkpoint])
    flush(traj)
    t_fin, st_fin = traj.final
    save_checkpoint(ckpt, problem, st_fin, t_fin, accepted["dt"], flushed["rows"])
    write_manifest(out, {
        "termination": traj.termination.value,
        "detail": traj.detail,
        "interrupted": traj.interrupted,
        "resumed": resume,
        "t_start": t0,
        "t_final": t_fin,
        "accepted_steps": len(traj.accepted_steps()),
        "attempted_steps": len(traj.telemetry),
        "final_nodes": int(np.size(state_columns(st_fin)[0])),
        "events": [f"t={t:.6g} {m}" for t, m in traj.events],
        "config": cfg.as_document(),
    })
    return traj


# ---------------------------------------------------------------------------
# construct-turnover


def cmd_construct(args) -> int:
    from .turnover import construct_turning_datum

    if not (0.0 < args.beta1 < args.beta2 < np.pi):
        raise ConfigError("need 0 < beta1 < beta2 < pi", "--beta1/--beta2")
    if args.n_modes < 8:
        raise ConfigError("n_modes must be at least 8", "--n-modes")
    try:
        curve, cert = construct_turning_datum(args.beta1, args.beta2, args.n_modes)
    except FamilyInvalidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAMILY
    except SearchFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except IncreaseModesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODES
    except ConstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(out / "curve.txt", 0.0, "contour", *state_columns(curve))
    doc = {"kind": "turnover_certificate", **cert.as_dict(), "delta_rho": curve.delta_rho, "curve_file": "curve.txt"}
    write_document(out / "certificate.txt", doc)
    print(f"integral_value = {cert.integral_value:.12g} +- {cert.integral_error:.2g}  b = {cert.b:g}  "
          f"passed = {cert.passed}")
    return EXIT_OK if cert.passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# verify


def _load_snapshots(paths):
    """[(t, state)] from snapshot files or run directories."""
    files = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("snapshot_*.txt")))
        else:
            files.append(p)
    if not files:
        raise ConfigError("no snapshot files given", "inputs")
    out = []
    for f in files:
        s = read_snapshot(f)
        if s.problem == "realline":
            out.append((s.t, RealLineGraph(float(s.alphas[-1]), s.columns[0])))
            continue
        n = s.n
        uni = np.allclose(s.alphas, PeriodicGrid.uniform_grid(n).alphas, rtol=0, atol=1e-15)
        grid = PeriodicGrid.uniform_grid(n) if uni else PeriodicGrid(s.alphas)
        if s.problem in ("contour", "galerkin"):
            out.append((s.t, Curve(PeriodicField(grid, s.columns[0]), PeriodicField(grid, s.columns[1]))))
        elif s.problem == "two-phase":
            out.append((s.t, (PeriodicField(grid, s.columns[0]), PeriodicField(grid, s.columns[1]))))
        else:
            out.append((s.t, GraphInterface(PeriodicField(grid, s.columns[0]))))
    out.sort(key=lambda p: p[0])
    return out


def _curve_from_file(path) -> Curve:
    s = read_snapshot(path)
    if s.columns.shape[0] < 2:
        raise ConfigError("curve file needs columns alpha z1-alpha z2", str(path))
    grid = PeriodicGrid.uniform_grid(s.n)
    if not np.allclose(grid.alphas, s.alphas, rtol=0, atol=1e-15):
        raise ConfigError("curve file must be on a uniform grid", str(path))
    return Curve(PeriodicField(grid, s.columns[0]), PeriodicField(grid, s.columns[1]))


def verify_reports(what: str, args) -> list:
    from . import diagnostics as dg
    from .quadrature import ad_inequality_margin
    from .turnover import TurnoverCertificate, certify, recheck_certificate

    if what == "max-principle":
        return [dg.max_principle_report(_load_snapshots(args.inputs))]
    if what == "l2-decay":
        return [dg.l2_decay_residual(_load_snapshots(args.inputs), args.delta_rho)]
    if what == "strip-width":
        fields = []
        for _, st in _load_snapshots(args.inputs):
            fields.append(st.f if isinstance(st, GraphInterface) else st.z2 if isinstance(st, Curve) else st[1])
        return [dg.strip_width_trend(fields)]
    if what == "ad-inequality":
        rng = np.random.default_rng(args.seed)
        grid = PeriodicGrid.uniform_grid(256)
        reports = []
        for i in range(args.random):
            deg = int(rng.integers(1, 17))
            k = np.arange(1, deg + 1)
            a, b = rng.standard_normal((2, deg)) / k
            g = PeriodicField(grid, rng.standard_normal() + a @ np.cos(np.outer(k, grid.alphas))
                              + b @ np.sin(np.outer(k, grid.alphas)))
            m = ad_inequality_margin(g)
            reports.append(dg.DiagnosticReport(f"ad_inequality[{i}]", m >= -1e-10, m, ">= 0", 1e-10,
                                               {"degree": deg}))
        return reports
    if what == "reducida":
        if not args.inputs:
            raise ConfigError("verify reducida needs a curve file", "inputs")
        curve = _curve_from_file(args.inputs[0])
        if args.certificate:
            doc = read_document(args.certificate)
            cert = TurnoverCertificate(
                doc["beta1"], doc["beta2"], doc["b"], doc["n_modes"], doc["integral_value"],
                doc["integral_error"], doc["dz2_at_0"], dict(doc.get("conditions", {})),
            )
        else:
            cert = certify(curve, 1.0, 2.0, 1.0, curve.n // 4)
        diff = recheck_certificate(curve, cert)
        return [
            dg.DiagnosticReport("reducida_recheck", diff <= cert.integral_error, diff, 0.0, cert.integral_error,
                                {"integral_value": cert.integral_value}),
            dg.DiagnosticReport("reducida_sign", cert.passed, cert.integral_value + cert.integral_error,
                                "< 0", 0.0),
        ]
    raise ConfigError(f"unknown verification {what!r}", "what")


def cmd_verify(args) -> int:
    reports = verify_reports(args.what, args)
    failed = [r for r in reports if not r.passed]
    for r in reports if args.verbose else failed:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: observed={r.observed:.6g} expected={r.expected}")
    print(f"{len(reports) - len(failed)}/{len(reports)} passed")
    if args.out:
        doc = {"kind": "diagnostic_reports", "what": args.what, "passed": not failed,
               "reports": {f"r{i:03d}": r.as_dict() for i, r in enumerate(reports)}}
        write_document(args.out, doc)
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------
# plot


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .curve import min_slope

    if not args.snapshots:
        raise ConfigError("no snapshot files given", "snapshots")
    snaps = sorted((read_snapshot(p) for p in args.snapshots), key=lambda s: s.t)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ncol = max(s.columns.shape[0] for s in snaps)
    fig, axes = plt.subplots(1, ncol, figsize=(6 * ncol, 4), squeeze=False)
    for s in snaps:
        for j in range(s.columns.shape[0]):
            axes[0, j].plot(s.alphas, s.columns[j], label=f"t={s.t:.3g}")
    for j in range(ncol):
        axes[0, j].set_xlabel("alpha")
        axes[0, j].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "interfaces.svg")
    plt.close(fig)
    written = ["interfaces.svg"]
    if snaps[0].problem in ("contour", "galerkin"):
        rows = []
        for s in snaps:
            grid = PeriodicGrid.uniform_grid(s.n)
            c = Curve(PeriodicField(grid, s.columns[0]), PeriodicField(grid, s.columns[1]))
            rows.append((s.t, *min_slope(c)))
        rows = np.array(rows)
        np.savetxt(out / "min_slope.txt", rows, fmt="%.17g", header="t min_slope argmin_alpha")
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(rows[:, 0], rows[:, 1], "o-")
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel("t")
        ax.set_ylabel("min d(alpha) z1")
        fig.savefig(out / "min_slope.svg")
        plt.close(fig)
        written += ["min_slope.txt", "min_slope.svg"]
    if args.telemetry:
        tel = read_telemetry(args.telemetry)
        acc = tel[tel[:, 3] > 0]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(acc[:, 0], acc[:, 1], ".")
        ax.set_xlabel("t")
        ax.set_ylabel("accepted dt")
        fig.savefig(out / "dt.svg")
        plt.close(fig)
        written.append("dt.svg")
    for w in written:
        print(out / w)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def cmd_simulate(args) -> int:
    if args.resume:
        out = Path(args.resume)
        cfg = load_config(str(out / "config.txt"), None, args.set)
    else:
        cfg = load_config(args.config, args.initial, args.set)
        out = Path(args.out or cfg.output_dir)
    log = (lambda m: print(m, flush=True)) if args.verbose else None
    traj = run_simulation(cfg, out, resume=bool(args.resume), max_steps=args.max_steps, log=log)
    print(f"{traj.termination.value}: {traj.detail}")
    return TERMINATION_EXIT[traj.termination]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="muskat", description="Muskat interface simulator and verification toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run an evolution problem")
    s.add_argument("initial", nargs="?", help="paper-two-phase, flat, cosine(eps,k), gaussian(eps,sigma) or file:PATH")
    s.add_argument("--config", help="key-value run configuration file")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration field")
    s.add_argument("--out", help="output directory (default: output_dir of the config)")
    s.add_argument("--resume", metavar="DIR", help="continue the run in DIR from its checkpoint")
    s.add_argument("--max-steps", type=int, help="stop after this many accepted steps")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("construct-turnover", help="build and certify a turning initial datum")
    c.add_argument("--beta1", type=float, default=1.0)
    c.add_argument("--beta2", type=float, default=2.0)
    c.add_argument("--n-modes", type=int, default=128)
    c.add_argument("--out", default="turnover")
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", help="run a diagnostic and emit reports")
    v.add_argument("what", choices=["max-principle", "l2-decay", "strip-width", "ad-inequality", "reducida"])
    v.add_argument("inputs", nargs="*", help="snapshot files, run directories or a curve file")
    v.add_argument("--certificate", help="certificate file for reducida")
    v.add_argument("--random", type=int, default=100, help="number of random polynomials (ad-inequality)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--delta-rho", type=float, default=DELTA_RHO_DEFAULT)
    v.add_argument("--out", help="report file")
    v.add_argument("-v", "--verbose", action="store_true")
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="render snapshot overlays as SVG")
    pl.add_argument("snapshots", nargs="*")
    pl.add_argument("--telemetry", help="telemetry file for the dt plot")
    pl.add_argument("--out", default="plots")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_worker_cap()
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GridError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArcChordViolation as exc:
        print(f"arc-chord failure: {exc}", file=sys.stderr)
        return EXIT_ARC_CHORD
    except QuadratureNonconvergence as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except ConstructionError as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except MuskatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
