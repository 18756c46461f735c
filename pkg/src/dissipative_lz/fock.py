"""Brute-force reference: Schrodinger evolution in a truncated Fock basis.

Basis ordering is ``|s> (x) |n_1> (x) ... (x) |n_N>`` with s = 0 for up and
s = 1 for down, the first mode being the most significant digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

from .bath import BathMode, Model, QubitParams
from .errors import ConfigError, TruncationError
from .integrator import RunConfig
from .state import Trajectory, VariationalState

MAX_DIM = 2**20
MAX_MODES = 3
DEFAULT_NMAX = {1: 40, 2: 12, 3: 6}
TRUNCATION_TOL = 1e-4
TRUNCATION_STEP = 8


@dataclass(frozen=True)
class FockConfig:
    qubit: QubitParams
    modes: tuple
    n_max: Optional[int] = None  # None picks a default by mode count
    run: RunConfig = RunConfig()

    def __init__(self, qubit: QubitParams, modes: Sequence[BathMode], n_max: Optional[int] = None,
                 run: RunConfig = RunConfig()):
        object.__setattr__(self, "qubit", qubit)
        object.__setattr__(self, "modes", tuple(modes))
        object.__setattr__(self, "n_max", n_max)
        object.__setattr__(self, "run", run)
        if len(self.modes) > MAX_MODES:
            raise ConfigError(f"the Fock oracle handles at most {MAX_MODES} modes, got {len(self.modes)}")
        nm = self.resolved_n_max
        if int(nm) != nm or nm < 0:
            raise ConfigError(f"n_max must be a non-negative integer, got {nm}")
        if self.dim > MAX_DIM:
            raise ConfigError(f"basis dimension {self.dim} exceeds the cap {MAX_DIM}")

    @property
    def resolved_n_max(self) -> int:
        if self.n_max is not None:
            return self.n_max
        return DEFAULT_NMAX.get(len(self.modes), 0)

    @property
    def dim(self) -> int:
        return 2 * (self.resolved_n_max + 1) ** len(self.modes)

    def with_n_max(self, n_max: int) -> "FockConfig":
        return FockConfig(self.qubit, self.modes, n_max, self.run)


def _ladder(n_levels: int):
    return sp.diags(np.sqrt(np.arange(1, n_levels, dtype=float)), 1, format="csr")


def _mode_operator(op, q: int, n_modes: int, n_levels: int):
    eye = sp.identity(n_levels, format="csr")
    out = sp.identity(1, format="csr")
    for j in range(n_modes):
        out = sp.kron(out, op if j == q else eye, format="csr")
    return out


def _parts(cfg: FockConfig):
    """Time-independent part H0 and the diagonal of the sigma_z operator."""
    nl = cfg.resolved_n_max + 1
    N = len(cfg.modes)
    sz = sp.csr_matrix(np.diag([1.0, -1.0]))
    sx = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    i2 = sp.identity(2, format="csr")
    ib = sp.identity(nl**N, format="csr")
    H0 = 0.5 * cfg.qubit.delta * sp.kron(sx, ib, format="csr")
    a = _ladder(nl)
    number_ops = []
    model = Model(cfg.qubit, cfg.modes)
    w, cq, sq = model.arrays
    for q in range(N):
        aq = _mode_operator(a, q, N, nl)
        nq = (aq.T @ aq).tocsr()
        number_ops.append(nq.diagonal())
        H0 = H0 + w[q] * sp.kron(i2, nq, format="csr")
        coup = 0.5 * (cq[q] * sz + sq[q] * sx)
        H0 = H0 + sp.kron(coup, (aq + aq.T).tocsr(), format="csr")
    zdiag = np.concatenate([np.ones(nl**N), -np.ones(nl**N)])
    nums = np.array(number_ops).reshape(N, nl**N)
    return H0.tocsr(), zdiag, nums


def build_hamiltonian(cfg: FockConfig, t: float):
    """Sparse Hamiltonian on the truncated basis at time ``t``."""
    H0, zdiag, _ = _parts(cfg)
    return (H0 + sp.diags(0.5 * cfg.qubit.v * t * zdiag)).tocsr()


@njit(cache=True)
def _apply(data, indices, indptr, zdiag, zc, psi):
    n = psi.shape[0]
    out = np.empty(n, np.complex128)
    for r in range(n):
        acc = zc * zdiag[r] * psi[r]
        for j in range(indptr[r], indptr[r + 1]):
            acc += data[j] * psi[indices[j]]
        out[r] = -1j * acc
    return out


@njit(cache=True)
def _advance(psi, data, indices, indptr, zdiag, halfv, t0, dt, k0, nsteps):
    for n in range(nsteps):
        t = t0 + (k0 + n) * dt
        k1 = _apply(data, indices, indptr, zdiag, halfv * t, psi)
        k2 = _apply(data, indices, indptr, zdiag, halfv * (t + 0.5 * dt), psi + 0.5 * dt * k1)
        k3 = _apply(data, indices, indptr, zdiag, halfv * (t + 0.5 * dt), psi + 0.5 * dt * k2)
        k4 = _apply(data, indices, indptr, zdiag, halfv * (t + dt), psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def _evolve(cfg: FockConfig) -> Trajectory:
    H0, zdiag, nums = _parts(cfg)
    rc = cfg.run
    half = zdiag.size // 2
    data = H0.data.astype(float)
    idx, ptr = H0.indices.astype(np.int64), H0.indptr.astype(np.int64)
    halfv = 0.5 * cfg.qubit.v
    psi = np.zeros(zdiag.size, complex)
    psi[0] = 1.0
    rows, bos = [], []

    def record(psi, t):
        p = np.abs(psi) ** 2
        nrm = p.sum()
        pd = p[half:].sum() / nrm
        pu = p[:half].sum() / nrm
        en = np.vdot(psi, H0 @ psi + halfv * t * zdiag * psi).real / nrm
        rows.append((t, pd, pu, nrm, pu - pd, en))
        bos.append(nums @ (p[:half] + p[half:]) / nrm)

    n_full, rest = rc.grid()
    stride = int(rc.record_stride)
    record(psi, rc.t_start)
    k = 0
    while k < n_full:
        n = min(stride, n_full - k)
        psi = _advance(psi, data, idx, ptr, zdiag, halfv, rc.t_start, rc.dt, k, n)
        k += n
        if k % stride == 0 or (k == n_full and rest == 0.0):
            record(psi, rc.t_end if (k == n_full and rest == 0.0) else rc.t_start + k * rc.dt)
    if rest > 0.0:
        psi = _advance(psi, data, idx, ptr, zdiag, halfv, rc.t_start + n_full * rc.dt, rest, 0, 1)
        record(psi, rc.t_end)
    arr = np.array(rows)
    omegas = np.array([m.omega for m in cfg.modes], dtype=float)
    return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5],
                      np.array(bos).reshape(len(rows), len(cfg.modes)), omegas)


def fock_evolve(cfg: FockConfig, check_truncation: bool = True) -> Trajectory:
    """Exact evolution from ``|up> (x) |0...0>``.

    With ``check_truncation`` the run is repeated with ``n_max + 8`` and the
    two P_down curves must agree to 1e-4, otherwise ``TruncationError``.
    """
    traj = _evolve(cfg)
    if check_truncation and cfg.modes:
        bigger = cfg.resolved_n_max + TRUNCATION_STEP
        try:
            ref_cfg = cfg.with_n_max(bigger)
        except ConfigError as exc:
            raise TruncationError(f"cannot verify truncation: {exc}", suggested_n_max=bigger) from exc
        ref = _evolve(ref_cfg)
        diff = float(np.max(np.abs(ref.p_down - traj.p_down)))
        if not diff <= TRUNCATION_TOL:
            raise TruncationError(
                f"Fock truncation n_max={cfg.resolved_n_max} not converged "
                f"(difference {diff:.3g} against n_max={bigger})",
                suggested_n_max=bigger + TRUNCATION_STEP,
                diagnostics=dict(sup_difference=diff))
        traj.warnings.append(f"truncation check vs n_max={bigger}: sup difference {diff:.3g}")
    return traj


def coherent_amplitudes(z: complex, n_max: int) -> np.ndarray:
    """Fock coefficients of the normalised coherent state ``|z>``."""
    out = np.zeros(n_max + 1, complex)
    if z == 0:
        out[0] = 1.0
        return out
    n = np.arange(n_max + 1)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    out[:] = np.exp(n * np.log(abs(z)) - 0.5 * logfact - 0.5 * abs(z) ** 2 + 1j * n * np.angle(z))
    return out


def variational_to_fock(state: VariationalState, n_max: int) -> np.ndarray:
    """Expand a multi-D2 state in the truncated Fock basis (no renormalisation)."""
    nl = n_max + 1
    N = state.N
    psi = np.zeros(2 * nl**N, complex)
    for i in range(state.M):
        bath = np.ones(1, complex)
        for q in range(N):
            bath = np.kron(bath, coherent_amplitudes(complex(state.f[i, q]), n_max))
        psi[: nl**N] += state.A[i] * bath
        psi[nl**N:] += state.B[i] * bath
    return psi


def number_diagonals(n_modes: int, n_max: int) -> np.ndarray:
    """Occupation of each mode on each bath basis state, shape (N, (n_max+1)^N)."""
    nl = n_max + 1
    grids = np.indices((nl,) * n_modes).reshape(n_modes, -1)
    return grids.astype(float)
