"""Batches of independent runs: Cartesian parameter sweeps and convergence scans."""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .bath import BathMode, Continuum, ExplicitModes
from .config import CONVERGE_KINDS, SWEEP_AXES, SimulationConfig
from .errors import ConfigError, LZError, NumericalBreakdown
from .integrator import RunConfig, run, steady_state_probability
from .state import Trajectory, initialize

DEFAULT_CAP = 512
CONVERGENCE_TOL = 0.01


@dataclass
class SweepSpec:
    base: SimulationConfig
    axes: dict = field(default_factory=dict)  # name -> list of values, in column order
    cap: int = DEFAULT_CAP
    base_seed: Optional[int] = None  # None uses base.seed

    def __post_init__(self):
        for name, vals in self.axes.items():
            if name not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {name!r}")
            if len(vals) == 0:
                raise ConfigError(f"sweep axis {name!r} is empty")
        if self.size > self.cap:
            raise ConfigError(f"sweep has {self.size} runs, above the cap of {self.cap}")

    @property
    def size(self) -> int:
        return int(np.prod([len(v) for v in self.axes.values()])) if self.axes else 1

    def points(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.axes.values())]


def derived_seed(base_seed: int, index: int) -> int:
    """Decorrelated, reproducible per-run seed."""
    return int(np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, np.uint64)[0])


def _set_modes(cfg: SimulationConfig, **changes) -> SimulationConfig:
    if not isinstance(cfg.bath, ExplicitModes):
        raise ConfigError(f"axes {sorted(changes)} need an explicit-mode bath")
    modes = cfg.bath.modes
    if "omega" in changes and len(modes) != 1:
        raise ConfigError("the omega axis needs exactly one explicit mode")
    new = [BathMode(changes.get("omega", m.omega), changes.get("gamma", m.gamma),
                    changes.get("theta", m.theta)) for m in modes]
    return replace(cfg, bath=ExplicitModes(new))


def _set_continuum(cfg: SimulationConfig, **changes) -> SimulationConfig:
    if not isinstance(cfg.bath, Continuum):
        raise ConfigError(f"axes {sorted(changes)} need a continuum bath")
    c = cfg.bath
    sd = replace(c.density, alpha=changes.get("alpha", c.density.alpha), s=changes.get("s", c.density.s))
    return replace(cfg, bath=replace(c, density=sd, n_modes=int(changes.get("N", c.n_modes)),
                                     omega_max=changes.get("omega_max", c.omega_max),
                                     theta=changes.get("theta", c.theta)))


def apply_point(cfg: SimulationConfig, point: dict) -> SimulationConfig:
    """Configuration with the axis values of ``point`` substituted."""
    for name, val in point.items():
        if name == "delta":
            cfg = replace(cfg, qubit=replace(cfg.qubit, delta=float(val)))
        elif name == "M":
            cfg = replace(cfg, M=int(val))
        elif name == "dt":
            cfg = replace(cfg, run=replace(cfg.run, dt=float(val)))
        elif name in ("gamma", "omega"):
            cfg = _set_modes(cfg, **{name: float(val)})
        elif name == "theta":
            cfg = (_set_modes if isinstance(cfg.bath, ExplicitModes) else _set_continuum)(cfg, theta=float(val))
        elif name in ("alpha", "s", "N", "omega_max"):
            cfg = _set_continuum(cfg, **{name: val})
        else:
            raise ConfigError(f"unknown sweep axis {name!r}")
    return cfg


def simulate(cfg: SimulationConfig) -> Trajectory:
    model = cfg.model()
    init = initialize(cfg.M, model.n_modes, cfg.seed, cfg.delta_offset, t=cfg.run.t_start)
    return run(init, cfg.run, model, cfg.solver)


def _run_one(args):
    index, point, cfg, keep = args
    t0 = time.perf_counter()
    row = dict(index=index, **point)
    traj = None
    try:
        traj = simulate(cfg)
        p, flat = steady_state_probability(traj, cfg.run)
        row.update(p_final=p, flat=flat, norm_drift=traj.max_norm_drift, status="ok")
    except NumericalBreakdown as exc:
        row.update(p_final=float("nan"), flat=False, norm_drift=float("nan"),
                   status=f"breakdown: {exc}")
    except LZError as exc:
        row.update(p_final=float("nan"), flat=False, norm_drift=float("nan"), status=f"error: {exc}")
    row["wall_time"] = time.perf_counter() - t0
    row["seed"] = cfg.seed
    return row, (traj if keep else None)


def _pool_map(fn, jobs, threads: int):
    workers = (os.cpu_count() or 1) if threads == 0 else max(1, int(threads))
    workers = min(workers, len(jobs)) if jobs else 1
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def run_sweep(spec: SweepSpec, threads: int = 1, keep_trajectories: bool = False):
    """Execute every point of the sweep; failures are recorded per row.

    Returns ``(rows, trajectories)``; rows are sorted by the axis values and
    ``trajectories`` maps run index to trajectory when ``keep_trajectories``.
    """
    base_seed = spec.base.seed if spec.base_seed is None else spec.base_seed
    jobs = []
    for index, point in enumerate(spec.points()):
        try:
            cfg = apply_point(spec.base, point).with_seed(derived_seed(base_seed, index))
        except (ConfigError, ValueError) as exc:
            jobs.append((index, point, None, str(exc)))
            continue
        jobs.append((index, point, cfg, keep_trajectories))
    runnable = [j for j in jobs if j[2] is not None]
    results = _pool_map(_run_one, runnable, threads)
    rows, trajs = [], {}
    for row, traj in results:
        rows.append(row)
        if traj is not None:
            trajs[row["index"]] = traj
    for index, point, cfg, msg in jobs:
        if cfg is None:
            rows.append(dict(index=index, **point, p_final=float("nan"), flat=False,
                             norm_drift=float("nan"), status=f"error: {msg}", wall_time=0.0, seed=-1))
    names = list(spec.axes)
    rows.sort(key=lambda r: tuple(r[n] for n in names) + (r["index"],))
    return rows, trajs


@dataclass
class ConvergenceResult:
    kind: str
    values: list
    trajectories: list  # None where the run failed
    differences: list  # sup |P_a - P_b| for consecutive values
    statuses: list
    threshold: float = CONVERGENCE_TOL

    @property
    def converged(self) -> bool:
        return bool(self.differences) and np.isfinite(self.differences[-1]) \
            and self.differences[-1] <= self.threshold


def sup_difference(a: Trajectory, b: Trajectory) -> float:
    """Sup-norm of the P_down difference, on the coarser of the two time grids."""
    if len(a.times) > len(b.times):
        a, b = b, a
    lo, hi = max(a.times[0], b.times[0]), min(a.times[-1], b.times[-1])
    mask = (a.times >= lo - 1e-12) & (a.times <= hi + 1e-12)
    other = np.interp(a.times[mask], b.times, b.p_down)
    return float(np.max(np.abs(a.p_down[mask] - other)))


def convergence_scan(kind: str, values: Sequence, base: SimulationConfig, threads: int = 1,
                     threshold: float = CONVERGENCE_TOL) -> ConvergenceResult:
    """Run the base configuration at each value of one numerical parameter.

    Every run uses the base seed so only the scanned parameter changes.
    """
    if kind not in CONVERGE_KINDS:
        raise ConfigError(f"convergence kind must be one of {CONVERGE_KINDS}, got {kind!r}")
    values = list(values)
    if len(values) < 2:
        raise ConfigError("a convergence scan needs at least two values")
    jobs = [(i, {kind: v}, apply_point(base, {kind: v}), True) for i, v in enumerate(values)]
    results = _pool_map(_run_one, jobs, threads)
    trajs = [t for _, t in results]
    statuses = [r["status"] for r, _ in results]
    diffs = []
    for a, b in zip(trajs[:-1], trajs[1:]):
        diffs.append(sup_difference(a, b) if a is not None and b is not None else float("nan"))
    return ConvergenceResult(kind, values, trajs, diffs, statuses, threshold)


def roughness(traj: Trajectory, t_after: float = 5.0, window: int = 21) -> float:
    """Std of P_down about its centred moving average, for records with t >= t_after."""
    p = traj.p_down[traj.times >= t_after]
    if p.size < window:
        raise ConfigError(f"need at least {window} records after t={t_after}")
    smooth = np.convolve(p, np.ones(window) / window, mode="valid")
    half = window // 2
    return float(np.std(p[half:p.size - half] - smooth))


def convergence_time(traj: Trajectory, config: RunConfig = RunConfig(), tol: float = 0.01) -> float:
    """First time after which P_down stays within ``tol`` of its steady value."""
    target, _ = steady_state_probability(traj, config)
    outside = np.nonzero(np.abs(traj.p_down - target) > tol)[0]
    if outside.size == 0:
        return float(traj.times[0])
    last = outside[-1]
    if last + 1 >= len(traj.times):
        return float("inf")
    return float(traj.times[last + 1])


def total_bosons(traj: Trajectory, window_fraction: float = 0.1) -> float:
    """Total boson number averaged over the trailing window of records."""
    tot = traj.boson_numbers.sum(axis=1)
    n = max(1, int(np.ceil(window_fraction * tot.size)))
    return float(tot[-n:].mean())
