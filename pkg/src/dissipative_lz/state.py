"""Multi-D2 variational state and its observables.

    |psi> = sum_i (A_i |up> + B_i |down>) |f_i>

with ``|f_i>`` a normalised multimode coherent state of displacements f_iq.
All observables are divided by the norm, so slow norm drift does not leak
into probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .bath import Model
from .errors import ConfigError, NumericalBreakdown


@dataclass
class VariationalState:
    A: np.ndarray
    B: np.ndarray
    f: np.ndarray  # shape (M, N)
    t: float = 0.0

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=complex)
        self.B = np.ascontiguousarray(self.B, dtype=complex)
        self.f = np.ascontiguousarray(self.f, dtype=complex)
        if self.A.ndim != 1 or self.A.shape != self.B.shape:
            raise ConfigError("A and B must be 1-d arrays of equal length")
        if self.f.ndim != 2 or self.f.shape[0] != self.A.shape[0]:
            raise ConfigError(f"f must have shape (M, N) with M={self.A.shape[0]}, got {self.f.shape}")
        if self.A.shape[0] < 1:
            raise ConfigError("multiplicity must be >= 1")

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.f.shape[1]

    def packed(self) -> np.ndarray:
        return np.concatenate([self.A, self.B, self.f.ravel()])

    @classmethod
    def from_packed(cls, y, M: int, N: int, t: float = 0.0) -> "VariationalState":
        y = np.asarray(y, dtype=complex)
        if y.shape != (M * (N + 2),):
            raise ConfigError(f"packed vector has length {y.size}, expected {M * (N + 2)}")
        return cls(y[:M].copy(), y[M:2 * M].copy(), y[2 * M:].reshape(M, N).copy(), t)

    def copy(self) -> "VariationalState":
        return VariationalState(self.A.copy(), self.B.copy(), self.f.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))
                    and np.all(np.isfinite(self.f)))


@dataclass
class Trajectory:
    times: np.ndarray
    p_down: np.ndarray
    p_up: np.ndarray
    norm: np.ndarray
    sigma_z: np.ndarray
    energy: np.ndarray
    boson_numbers: np.ndarray  # shape (T, N)
    omegas: np.ndarray
    snapshots: Optional[list] = None
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0))) if len(self.norm) else 0.0


def overlap_matrix(state: VariationalState) -> np.ndarray:
    """``S[j, i] = <f_j|f_i>``."""
    return K.overlaps(state.f)


def debye_waller(state: VariationalState, j: int, i: int) -> complex:
    """Overlap ``<f_j|f_i>`` of two configurations (0-based indices)."""
    M = state.M
    if not (0 <= i < M and 0 <= j < M):
        raise ConfigError(f"configuration index out of range 0..{M - 1}: ({j}, {i})")
    if i == j:
        return 1.0 + 0j
    fj, fi = state.f[j], state.f[i]
    expo = np.sum(-(np.abs(fj) ** 2 + np.abs(fi) ** 2) / 2 + fj.conj() * fi)
    return complex(np.exp(expo))


def _weighted(state: VariationalState, S, up_sign: float, dn_sign: float) -> complex:
    A, B = state.A, state.B
    W = up_sign * np.outer(A.conj(), A) + dn_sign * np.outer(B.conj(), B)
    return complex(np.sum(W * S))


def _norm_from(state, S) -> float:
    A, B = state.A, state.B
    terms = (np.outer(A.conj(), A) + np.outer(B.conj(), B)) * S
    val = complex(np.sum(terms))
    # the bilinear is Hermitian; rounding scales with the size of the terms summed
    scale = max(1.0, float(np.sum(np.abs(terms))))
    if not abs(val.imag) <= 1e-10 * scale:
        raise NumericalBreakdown(f"norm bilinear has imaginary part {val.imag:.3g}", t=state.t)
    if not val.real > 0:
        raise NumericalBreakdown(f"non-positive state norm {val.real}", t=state.t)
    return val.real


def norm(state: VariationalState) -> float:
    return _norm_from(state, overlap_matrix(state))


def _populations(state, S):
    # normalising by up + down keeps P_down + P_up = 1 to rounding; the full
    # bilinear differs from that sum by cancellation error in large amplitudes
    _norm_from(state, S)
    up = _weighted(state, S, 1.0, 0.0).real
    dn = _weighted(state, S, 0.0, 1.0).real
    return up / (up + dn), dn / (up + dn)


def transition_probability(state: VariationalState) -> float:
    """Normalised population of ``|down>``."""
    return _populations(state, overlap_matrix(state))[1]


def sigma_z_expectation(state: VariationalState) -> float:
    pu, pd = _populations(state, overlap_matrix(state))
    return pu - pd


def boson_numbers(state: VariationalState) -> np.ndarray:
    """``<b_q^+ b_q>`` for every mode."""
    S = overlap_matrix(state)
    nrm = _norm_from(state, S)
    A, B, F = state.A, state.B, state.f
    P = (np.outer(A.conj(), A) + np.outer(B.conj(), B)) * S
    # sum_{j,i} P_ji f*_jq f_iq
    return np.real(np.einsum("ji,jq,iq->q", P, F.conj(), F)) / nrm


def hamiltonian_expectation(state: VariationalState, t: float, model: Model) -> float:
    w, cq, sq = model.arrays
    if state.N != len(w):
        raise ConfigError(f"state has {state.N} modes, model has {len(w)}")
    S = overlap_matrix(state)
    q = model.qubit
    hup, hdn, _ = K.h_projections(state.A, state.B, state.f, S, float(t), q.v, q.delta, w, cq, sq)
    val = np.vdot(state.A, hup) + np.vdot(state.B, hdn)
    return float(val.real) / _norm_from(state, S)


def observables(state: VariationalState, model: Model) -> dict:
    """Everything a trajectory record needs, sharing one overlap evaluation."""
    S = overlap_matrix(state)
    nrm = _norm_from(state, S)
    pu, pd = _populations(state, S)
    sz = pu - pd
    A, B, F = state.A, state.B, state.f
    P = (np.outer(A.conj(), A) + np.outer(B.conj(), B)) * S
    nq = np.real(np.einsum("ji,jq,iq->q", P, F.conj(), F)) / nrm
    w, cq, sq = model.arrays
    q = model.qubit
    hup, hdn, _ = K.h_projections(A, B, F, S, float(state.t), q.v, q.delta, w, cq, sq)
    en = float((np.vdot(A, hup) + np.vdot(B, hdn)).real) / nrm
    return dict(norm=nrm, p_down=pd, p_up=pu, sigma_z=sz, energy=en, boson_numbers=nq)


def initialize(M: int, N: int, seed: int = 0, delta_offset: float = 1e-3,
               t: float = 0.0) -> VariationalState:
    """Qubit in ``|up>``, bath in vacuum.

    Configurations beyond the first carry small seeded offsets so the overlap
    matrix is not exactly rank one; the state is then rescaled to unit norm.
    """
    if int(M) != M or M < 1:
        raise ConfigError(f"multiplicity must be an integer >= 1, got {M}")
    if int(N) != N or N < 0:
        raise ConfigError(f"mode count must be an integer >= 0, got {N}")
    if not (delta_offset >= 0 and np.isfinite(delta_offset)):
        raise ConfigError(f"delta_offset must be >= 0, got {delta_offset}")
    M, N = int(M), int(N)
    rng = np.random.default_rng(seed)
    A = np.zeros(M, complex)
    B = np.zeros(M, complex)
    F = np.zeros((M, N), complex)
    A[0] = 1.0
    if M > 1:
        A[1:] = delta_offset * (rng.standard_normal(M - 1) + 1j * rng.standard_normal(M - 1)) / np.sqrt(2)
        F[1:] = delta_offset * (rng.standard_normal((M - 1, N)) + 1j * rng.standard_normal((M - 1, N))) / np.sqrt(2)
    st = VariationalState(A, B, F, t)
    s = np.sqrt(norm(st))
    st.A /= s
    st.B /= s
    return st
