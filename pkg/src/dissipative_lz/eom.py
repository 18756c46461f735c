"""Time-dependent variational equations of motion for the multi-D2 state.

Two routes to the same derivatives:

* ``assemble`` writes the projected equations as a real-linear system over
  2D real unknowns (real and imaginary parts interleaved). The time derivative
  of ``|f|^2`` couples each rate to its conjugate, which is why the system is
  real-linear rather than complex-linear.
* ``solve_derivatives`` solves the equivalent Hermitian tangent-space system
  in compiled code, reducing the displacement block to span{f_i} exactly.

Tests check one route against the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _kernels as K
from .bath import Model
from .errors import ConfigError, NumericalBreakdown
from .state import VariationalState

METHODS = ("structured", "hermitian", "real")
RIDGE_SCALINGS = ("configuration", "global")

# relative residual above which the regularised factorisation is abandoned
FALLBACK_RESIDUAL = 1e-8
# residual of the fallback (inside the retained subspace) that counts as breakdown
BREAKDOWN_RESIDUAL = 1e-6


@dataclass(frozen=True)
class SolverPolicy:
    """Regularisation of the projected linear system.

    ``tikhonov_eps`` is the ridge relative to the diagonal scale of the Gram
    matrix. ``svd_cutoff`` drops eigenvalues below that fraction of the
    largest one in the fallback solve.
    """

    tikhonov_eps: float = 1e-5
    svd_cutoff: float = 1e-10
    condition_warn: float = 1e12
    method: str = "structured"
    norm_correction: bool = True
    refine_sweeps: int = 1
    ridge_scaling: str = "configuration"

    def __post_init__(self):
        for name in ("tikhonov_eps", "svd_cutoff", "condition_warn"):
            val = getattr(self, name)
            if not (val > 0 and np.isfinite(val)):
                raise ConfigError(f"{name} must be positive, got {val}")
        if int(self.refine_sweeps) != self.refine_sweeps or self.refine_sweeps < 0:
            raise ConfigError(f"refine_sweeps must be a non-negative integer, got {self.refine_sweeps}")
        if self.ridge_scaling not in RIDGE_SCALINGS:
            raise ConfigError(f"ridge_scaling must be one of {RIDGE_SCALINGS}, got {self.ridge_scaling!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown solver method {self.method!r}, expected one of {METHODS}")


def pack(z) -> np.ndarray:
    """Complex vector -> real vector with (re, im) interleaved per entry."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def unpack(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size % 2:
        raise ConfigError("packed real vector must have even length")
    return x[0::2] + 1j * x[1::2]


def _check(state: VariationalState, model: Model):
    if state.N != model.n_modes:
        raise ConfigError(f"state has {state.N} modes but the bath has {model.n_modes}")


def assemble(state: VariationalState, t: float, model: Model):
    """Real-linear form ``K x = b`` of the projected equations of motion.

    Rows are the projections on ``<up, f_k|``, ``<down, f_k|`` and
    ``(A_k*<up| + B_k*<down|) <f_k| b_q``. Unknowns are the rates
    [Adot, Bdot, fdot] packed by ``pack``.
    """
    _check(state, model)
    A, B, F = state.A, state.B, state.f
    M, N = F.shape
    D = M * (N + 2)
    w, cq, sq = model.arrays
    q = model.qubit
    S = K.overlaps(F)
    hup, hdn, hf = K.h_projections(A, B, F, S, float(t), q.v, q.delta, w, cq, sq)
    rho = np.outer(A.conj(), A) + np.outer(B.conj(), B)
    R = rho * S
    fi = 2 * M
    # coefficient of each complex rate (Pm) and of its conjugate (Qm)
    Pm = np.zeros((D, D), complex)
    Qm = np.zeros((D, D), complex)
    Pm[:M, :M] = S
    Pm[M:fi, M:fi] = S
    # d/dt of the overlap: S_ki (f*_kq fdot_iq - (f*_iq fdot_iq + f_iq fdot*_iq) / 2)
    Pm[:M, fi:] = (S[:, :, None] * A[None, :, None]
                   * (F.conj()[:, None, :] - 0.5 * F.conj()[None, :, :])).reshape(M, M * N)
    Qm[:M, fi:] = (-0.5 * S[:, :, None] * A[None, :, None] * F[None, :, :]).reshape(M, M * N)
    Pm[M:fi, fi:] = (S[:, :, None] * B[None, :, None]
                     * (F.conj()[:, None, :] - 0.5 * F.conj()[None, :, :])).reshape(M, M * N)
    Qm[M:fi, fi:] = (-0.5 * S[:, :, None] * B[None, :, None] * F[None, :, :]).reshape(M, M * N)
    Pm[fi:, :M] = (S[:, None, :] * A.conj()[:, None, None] * F.T[None, :, :]).reshape(M * N, M)
    Pm[fi:, M:fi] = (S[:, None, :] * B.conj()[:, None, None] * F.T[None, :, :]).reshape(M * N, M)
    blk = R[:, None, :, None] * F.T[None, :, :, None] * (F.conj()[:, None, None, :] - 0.5 * F.conj()[None, None, :, :])
    blk = blk + R[:, None, :, None] * np.eye(N)[None, :, None, :]
    Pm[fi:, fi:] = blk.reshape(M * N, M * N)
    Qm[fi:, fi:] = (-0.5 * R[:, None, :, None] * F.T[None, :, :, None] * F[None, None, :, :]).reshape(M * N, M * N)
    rhs = -1j * np.concatenate([hup, hdn, hf.ravel()])
    # z = x + i y:  P z + Q z* = (P + Q) x + i (P - Q) y
    Pp, Pn = Pm + Qm, Pm - Qm
    Kr = np.empty((2 * D, 2 * D))
    Kr[0::2, 0::2] = Pp.real
    Kr[0::2, 1::2] = -Pn.imag
    Kr[1::2, 0::2] = Pp.imag
    Kr[1::2, 1::2] = Pn.real
    return Kr, pack(rhs)


@dataclass
class SolveInfo:
    status: int
    condition: float
    residual: float
    norm_rate: float

    @property
    def fell_back(self) -> bool:
        return self.status >= K.STATUS_FALLBACK


def _solve_real(state, t, model, policy):
    Kr, b = assemble(state, t, model)
    scale = max(1.0, float(np.max(np.abs(np.diag(Kr))))) if Kr.size else 1.0
    x = None
    status = K.STATUS_OK
    cond = 1.0
    try:
        lu = sla.lu_factor(Kr + policy.tikhonov_eps * scale * np.eye(len(b)), check_finite=False)
        x = sla.lu_solve(lu, b, check_finite=False)
        for _ in range(int(policy.refine_sweeps)):
            x = x + sla.lu_solve(lu, b - Kr @ x, check_finite=False)
        res = np.linalg.norm(Kr @ x - b) / max(np.linalg.norm(b), 1e-300)
        if not (np.all(np.isfinite(x)) and res <= FALLBACK_RESIDUAL):
            x = None
    except (ValueError, np.linalg.LinAlgError, sla.LinAlgWarning):
        x = None
    if x is None:
        x, _, rank, sv = sla.lstsq(Kr, b, cond=policy.svd_cutoff, check_finite=False)
        res = np.linalg.norm(Kr @ x - b) / max(np.linalg.norm(b), 1e-300)
        cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
        status = K.STATUS_FALLBACK
        if not res <= BREAKDOWN_RESIDUAL:
            status = K.STATUS_BREAKDOWN
    else:
        res = float(res)
    ydot = unpack(x)
    return ydot, SolveInfo(status, cond, float(res), float("nan"))


def rates(y, M, N, t, model: Model, policy: SolverPolicy):
    """Packed complex rates for a packed complex state (integrator hot path)."""
    w, cq, sq = model.arrays
    q = model.qubit
    return K.rates(y, M, N, float(t), q.v, q.delta, w, cq, sq, kernel_options(policy))


def kernel_options(policy: SolverPolicy) -> np.ndarray:
    return np.array([policy.tikhonov_eps, policy.svd_cutoff, FALLBACK_RESIDUAL, BREAKDOWN_RESIDUAL,
                     float(policy.method == "structured"), float(policy.norm_correction),
                     float(policy.refine_sweeps), float(policy.ridge_scaling == "configuration")])


def solve_derivatives(state: VariationalState, t: float, model: Model,
                      policy: SolverPolicy = SolverPolicy(), strict: bool = True):
    """Rates of change ``(Adot, Bdot, fdot)`` at ``(state, t)``.

    Returns ``(VariationalState of rates, SolveInfo)``. With ``strict`` a
    failed solve raises ``NumericalBreakdown`` carrying ``t`` and diagnostics.
    """
    _check(state, model)
    M, N = state.M, state.N
    if policy.method == "real":
        ydot, info = _solve_real(state, t, model, policy)
    else:
        ydot, arr = rates(state.packed(), M, N, t, model, policy)
        info = SolveInfo(int(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))
    if strict and (info.status == K.STATUS_BREAKDOWN or not np.all(np.isfinite(ydot))):
        raise NumericalBreakdown(
            f"equations of motion could not be solved at t={t:.6g} "
            f"(residual {info.residual:.3g}, condition {info.condition:.3g})",
            t=t, diagnostics=dict(residual=info.residual, condition=info.condition))
    return VariationalState.from_packed(ydot, M, N, t), info
