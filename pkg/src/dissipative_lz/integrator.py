"""Fixed-step fourth-order Runge-Kutta propagation of the variational state."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bath import Model
from .eom import SolverPolicy, kernel_options, solve_derivatives
from .errors import ConfigError, NumericalBreakdown
from .state import Trajectory, VariationalState, norm, observables

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    t_start: float = -20.0
    t_end: float = 40.0
    dt: float = 1e-3
    record_stride: int = 100
    norm_drift_abort: float = 1e-4
    norm_drift_warn: float = 1e-6
    steady_window_fraction: float = 0.1
    flatness_tol: float = 0.005
    snapshot_stride: int = 0  # in records; 0 keeps no raw states

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end) and self.t_start < self.t_end):
            raise ConfigError(f"need t_start < t_end, got {self.t_start}, {self.t_end}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError(f"record_stride must be a positive integer, got {self.record_stride}")
        if not 0 < self.steady_window_fraction < 1:
            raise ConfigError("steady_window_fraction must lie in (0, 1)")
        if not (self.norm_drift_abort > 0 and self.norm_drift_warn > 0 and self.flatness_tol > 0):
            raise ConfigError("drift and flatness thresholds must be positive")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride must be a non-negative integer")

    def grid(self) -> tuple[int, float]:
        """Number of full steps and the length of a trailing partial step (0 if none)."""
        span = self.t_end - self.t_start
        n = int(math.floor(span / self.dt + 1e-9))
        rest = span - n * self.dt
        if rest <= 1e-9 * self.dt:
            rest = 0.0
        return n, rest


def rk4_step(state: VariationalState, t: float, dt: float, model: Model,
             policy: SolverPolicy = SolverPolicy()) -> VariationalState:
    """One classical RK4 step; each stage sees the drive at its own time."""
    y = state.packed()
    M, N = state.M, state.N

    def f(yy, tt):
        d, _ = solve_derivatives(VariationalState.from_packed(yy, M, N, tt), tt, model, policy)
        return d.packed()

    k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    return VariationalState.from_packed(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), M, N, t + dt)


class _Recorder:
    def __init__(self, model: Model, snapshot_stride: int):
        self.model = model
        self.rows = []
        self.bosons = []
        self.snap_stride = snapshot_stride
        self.snapshots = [] if snapshot_stride else None

    def add(self, y, M, N, t):
        st = VariationalState.from_packed(y, M, N, t)
        ob = observables(st, self.model)
        if self.snapshots is not None and len(self.rows) % self.snap_stride == 0:
            self.snapshots.append(st)
        self.rows.append((t, ob["p_down"], ob["p_up"], ob["norm"], ob["sigma_z"], ob["energy"]))
        self.bosons.append(ob["boson_numbers"])

    def trajectory(self) -> Trajectory:
        arr = np.array(self.rows, dtype=float).reshape(-1, 6)
        nb = np.array(self.bosons, dtype=float).reshape(len(self.rows), self.model.n_modes)
        return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5], nb,
                          self.model.arrays[0].copy(), self.snapshots)


def run(initial: VariationalState, config: RunConfig, model: Model,
        policy: SolverPolicy = SolverPolicy()) -> Trajectory:
    """Propagate ``initial`` (taken to sit at ``config.t_start``) to ``config.t_end``.

    Observables are recorded every ``record_stride`` steps and at ``t_end``.
    Raises ``NumericalBreakdown`` carrying the last good time when the solve
    fails, values become non-finite, or the norm drifts past the abort limit.
    """
    if initial.N != model.n_modes:
        raise ConfigError(f"state has {initial.N} modes but the bath has {model.n_modes}")
    nrm0 = norm(initial)
    if abs(nrm0 - 1.0) > config.norm_drift_warn:
        raise ConfigError(f"initial state must be normalised, norm is {nrm0:.12g}")
    M, N = initial.M, initial.N
    w, cq, sq = model.arrays
    q = model.qubit
    n_full, rest = config.grid()
    stride = int(config.record_stride)
    y = np.ascontiguousarray(initial.packed())
    rec = _Recorder(model, int(config.snapshot_stride))
    rec.add(y, M, N, config.t_start)
    opts = kernel_options(policy)
    if policy.method == "real":
        raise ConfigError("the real-linear solver is a reference route; use it via solve_derivatives")
    worst = np.array([1.0, 0.0, 0.0, 0.0])

    def step(y, t0, k0, nsteps, dt):
        y2, done, flag, stats = K.advance(
            y, M, N, t0, dt, k0, nsteps, q.v, q.delta, w, cq, sq, opts, config.norm_drift_abort)
        worst[0] = max(worst[0], stats[0])
        worst[1] = max(worst[1], stats[1])
        worst[2] += stats[2]
        worst[3] = max(worst[3], stats[3])
        if flag != K.ADV_OK:
            t_good = t0 + (k0 + done) * dt
            reason = {K.ADV_BREAKDOWN: "equations of motion could not be solved",
                      K.ADV_NONFINITE: "state became non-finite",
                      K.ADV_DRIFT: f"norm drift exceeded {config.norm_drift_abort:g}"}[flag]
            raise NumericalBreakdown(
                f"{reason}; last good time t={t_good:.6g}", t=t_good,
                diagnostics=dict(max_condition=worst[0], max_residual=worst[1],
                                 fallback_solves=int(worst[2]), max_norm_drift=worst[3]))
        return y2

    k = 0
    while k < n_full:
        n = min(stride, n_full - k)
        y = step(y, config.t_start, k, n, config.dt)
        k += n
        if k % stride == 0 or (k == n_full and rest == 0.0):
            t = config.t_end if (k == n_full and rest == 0.0) else config.t_start + k * config.dt
            rec.add(y, M, N, t)
    if rest > 0.0:
        # trailing partial step lands exactly on t_end
        y = step(y, config.t_start + n_full * config.dt, 0, 1, rest)
        rec.add(y, M, N, config.t_end)

    traj = rec.trajectory()
    if worst[0] > policy.condition_warn:
        msg = f"projected system condition estimate reached {worst[0]:.3g}"
        traj.warnings.append(msg)
        log.info(msg)
    if worst[2]:
        traj.warnings.append(f"{int(worst[2])} solves used the eigen-decomposition fallback")
    if traj.max_norm_drift > config.norm_drift_warn:
        msg = f"norm drift {traj.max_norm_drift:.3g} exceeds warning level {config.norm_drift_warn:g}"
        traj.warnings.append(msg)
        log.warning(msg)
    return traj


def steady_state_probability(traj: Trajectory, config: RunConfig = RunConfig()) -> tuple[float, bool]:
    """Mean of P_down over the trailing window of records and whether it is flat."""
    p = np.asarray(traj.p_down, dtype=float)
    if p.size == 0:
        raise ConfigError("empty trajectory")
    n = max(1, int(math.ceil(config.steady_window_fraction * p.size)))
    tail = p[-n:]
    return float(tail.mean()), bool(tail.std() <= config.flatness_tol)
