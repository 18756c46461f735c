import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative_lz import (BathMode, ConfigError, Model, NumericalBreakdown, QubitParams,
                            VariationalState, boson_numbers, debye_waller, hamiltonian_expectation,
                            initialize, norm, sigma_z_expectation, transition_probability)
from dissipative_lz.fock import FockConfig, build_hamiltonian, number_diagonals, variational_to_fock
from dissipative_lz.state import observables, overlap_matrix

from conftest import random_state

NMAX = 30


def _fock(state, n_max=NMAX):
    psi = variational_to_fock(state, n_max)
    half = psi.size // 2
    return psi, half


def test_debye_waller_trivial_cases():
    s = VariationalState([1, 0], [0, 0], np.zeros((2, 3)))
    assert debye_waller(s, 0, 1) == 1.0
    z = 0.3 - 0.8j
    s = VariationalState([1, 0], [0, 0], [[0.0], [z]])
    assert debye_waller(s, 0, 1) == pytest.approx(math.exp(-abs(z) ** 2 / 2), rel=1e-14)
    s = random_state(3, 4, 1)
    for i in range(3):
        assert debye_waller(s, i, i) == 1.0
    with pytest.raises(ConfigError):
        debye_waller(s, 0, 3)


def test_overlap_matrix_hermitian_and_matches_pairwise(rand_state):
    s = rand_state(5, 3, 2)
    S = overlap_matrix(s)
    assert np.allclose(S, S.conj().T, atol=1e-15)
    assert np.all(np.diag(S) == 1.0)
    for j in range(5):
        for i in range(5):
            assert S[j, i] == pytest.approx(debye_waller(s, j, i), rel=1e-12)
    # positive semidefinite as a Gram matrix of coherent states
    assert np.linalg.eigvalsh(S).min() > -1e-12


def test_norm_trivial_cases():
    s = VariationalState([0.6], [0.8j], [[1.3 - 0.2j, 0.5]])
    assert norm(s) == pytest.approx(1.0, abs=1e-15)
    a = 0.7 - 0.1j
    s = VariationalState([a, a], [0, 0], [[0.4j], [0.4j]])
    assert norm(s) == pytest.approx(4 * abs(a) ** 2, rel=1e-14)


def test_zero_state_is_breakdown():
    with pytest.raises(NumericalBreakdown):
        norm(VariationalState([0.0], [0.0], [[0.0]]))


@pytest.mark.parametrize("seed", range(4))
def test_observables_match_fock_expansion(seed):
    s = random_state(3, 2, seed, scale=0.5)
    psi, half = _fock(s, 24)
    nrm = np.vdot(psi, psi).real
    assert norm(s) == pytest.approx(nrm, rel=1e-10)
    pd = np.vdot(psi[half:], psi[half:]).real / nrm
    assert transition_probability(s) == pytest.approx(pd, abs=1e-10)
    zd = np.concatenate([np.ones(half), -np.ones(half)])
    assert sigma_z_expectation(s) == pytest.approx(np.vdot(psi, zd * psi).real / nrm, abs=1e-10)
    nd = number_diagonals(2, 24)
    nq = [np.vdot(psi, np.concatenate([d, d]) * psi).real / nrm for d in nd]
    assert np.allclose(boson_numbers(s), nq, atol=1e-9)


@pytest.mark.parametrize("theta", [0.0, 0.7, math.pi / 2])
def test_energy_matches_fock_hamiltonian(theta):
    s = random_state(2, 1, 7, scale=0.7)
    model = Model(QubitParams(1.0, 0.45), [BathMode(1.7, 0.9, theta)])
    t = -0.8
    psi, _ = _fock(s, 40)
    H = build_hamiltonian(FockConfig(model.qubit, model.modes, 40), t)
    ref = np.vdot(psi, H @ psi).real / np.vdot(psi, psi).real
    assert hamiltonian_expectation(s, t, model) == pytest.approx(ref, abs=1e-9)
    s.t = t
    assert observables(s, model)["energy"] == pytest.approx(ref, abs=1e-9)


def test_trivial_observables():
    init = initialize(1, 3, delta_offset=0.0)
    assert transition_probability(init) == 0.0
    assert sigma_z_expectation(init) == 1.0
    assert np.all(boson_numbers(init) == 0.0)
    s = VariationalState([0], [1j], [[0.5, 0.1]])
    assert transition_probability(s) == 1.0
    r = 2 ** -0.5
    s = VariationalState([r], [r], [[0.3 + 0.2j]])
    assert sigma_z_expectation(s) == pytest.approx(0.0, abs=1e-15)
    z = 0.9 - 0.4j
    s = VariationalState([1.0], [0.0], [[z, 0.0]])
    assert np.allclose(boson_numbers(s), [abs(z) ** 2, 0.0], atol=1e-15)


def test_energy_trivial_cases():
    m0 = Model(QubitParams(1.0, 0.7), [])
    s = VariationalState([1.0], [0.0], np.zeros((1, 0)))
    assert hamiltonian_expectation(s, 0.0, m0) == 0.0
    z = 0.6 + 0.25j
    m1 = Model(QubitParams(1.0, 0.0), [BathMode(3.0, 1.2)])
    s = VariationalState([1.0], [0.0], [[z]])
    assert hamiltonian_expectation(s, 0.0, m1) == pytest.approx(3.0 * abs(z) ** 2, abs=1e-14)
    with pytest.raises(ConfigError):
        hamiltonian_expectation(VariationalState([1.0], [0.0], [[z, z]]), 0.0, m1)


def test_initialize_contract():
    s = initialize(1, 4, seed=5, delta_offset=0.0)
    assert s.A[0] == 1.0 and s.B[0] == 0.0 and np.all(s.f == 0)
    for seed in range(5):
        s = initialize(4, 3, seed=seed)
        assert norm(s) == pytest.approx(1.0, abs=1e-12)
    a, b = initialize(5, 6, seed=11), initialize(5, 6, seed=11)
    assert np.array_equal(a.packed(), b.packed())
    assert not np.array_equal(a.packed(), initialize(5, 6, seed=12).packed())
    for bad in [dict(M=0, N=1), dict(M=2.5, N=1), dict(M=1, N=-1)]:
        with pytest.raises(ConfigError):
            initialize(**bad)
    with pytest.raises(ConfigError):
        initialize(2, 2, delta_offset=-1.0)


def test_packing_round_trip(rand_state):
    s = rand_state(3, 4, 0)
    r = VariationalState.from_packed(s.packed(), 3, 4)
    assert np.array_equal(r.A, s.A) and np.array_equal(r.B, s.B) and np.array_equal(r.f, s.f)
    with pytest.raises(ConfigError):
        VariationalState.from_packed(s.packed()[:-1], 3, 4)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), M=st.integers(1, 5), N=st.integers(1, 4),
       phase=st.floats(0, 2 * math.pi))
def test_global_phase_invariance(seed, M, N, phase):
    s = random_state(M, N, seed)
    u = np.exp(1j * phase)
    r = VariationalState(u * s.A, u * s.B, s.f)
    model = Model(QubitParams(1.0, 0.3), [BathMode(1.0 + q, 0.5, 0.4) for q in range(N)])
    o1, o2 = observables(s, model), observables(r, model)
    for k in ("norm", "p_down", "sigma_z", "energy"):
        assert o2[k] == pytest.approx(o1[k], rel=1e-12, abs=1e-12)
    assert np.allclose(o1["boson_numbers"], o2["boson_numbers"], rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), M=st.integers(1, 5), N=st.integers(0, 4))
def test_probability_sum_and_bounds(seed, M, N):
    s = random_state(M, N, seed)
    model = Model(QubitParams(), [BathMode(1.0 + q, 0.5) for q in range(N)])
    o = observables(s, model)
    assert o["p_down"] + o["p_up"] == pytest.approx(1.0, abs=1e-12)
    assert -1e-9 <= o["p_down"] <= 1 + 1e-9
    assert np.all(o["boson_numbers"] >= -1e-10)
    S = overlap_matrix(s)
    assert np.allclose(S, S.conj().T, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), big=st.floats(1.0, 1e3), sep=st.floats(1e-4, 1e-1))
def test_probability_sum_with_cancelling_amplitudes(seed, big, sep):
    # near-identical configurations carrying large opposite amplitudes
    s = random_state(3, 2, seed)
    s.f[1] = s.f[0] + sep
    s.A[1] = -s.A[0] + big * 1e-3 * s.A[1]
    s.A[0] *= big
    s.A[1] *= big
    o = observables(s, Model(QubitParams(), [BathMode(1.0, 0.5), BathMode(2.0, 0.5)]))
    assert abs(o["p_down"] + o["p_up"] - 1.0) <= 4 * np.finfo(float).eps
    assert o["sigma_z"] == pytest.approx(o["p_up"] - o["p_down"], abs=1e-15)
