import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative_lz import (BathMode, ConfigError, Model, NumericalBreakdown, QubitParams,
                            SolverPolicy, VariationalState, assemble, initialize, norm,
                            solve_derivatives)
from dissipative_lz.eom import pack, unpack
from dissipative_lz.fock import variational_to_fock

from conftest import random_state

EXACT = dict(tikhonov_eps=1e-15, svd_cutoff=1e-14)


def _model(N, delta=0.4, theta=1.1):
    return Model(QubitParams(1.0, delta), [BathMode(0.8 + 0.7 * q, 0.6 + 0.1 * q, theta) for q in range(N)])


def _spread_state(M, N, seed):
    # well separated configurations keep the Gram matrix well conditioned
    s = random_state(M, N, seed, scale=0.3)
    s.f += np.arange(M)[:, None] * (0.9 + 0.4j)
    return s


def test_pack_round_trip():
    z = np.array([1 + 2j, -3.5j, 0.25])
    assert np.array_equal(unpack(pack(z)), z)
    assert np.array_equal(pack(z), [1, 2, 0, -3.5, 0.25, 0])


@pytest.mark.parametrize("M,N", [(1, 1), (2, 1), (2, 3), (3, 5)])
def test_hermitian_and_structured_match_real_route(M, N):
    s = _spread_state(M, N, 3 + M + N)
    model = _model(N)
    t = 0.37
    ref, _ = solve_derivatives(s, t, model, SolverPolicy(method="real", **EXACT))
    Kr, b = assemble(s, t, model)
    x = pack(ref.packed())
    assert np.linalg.norm(Kr @ x - b) <= 1e-10 * np.linalg.norm(b)
    for method in ("hermitian", "structured"):
        r, info = solve_derivatives(s, t, model, SolverPolicy(method=method, **EXACT))
        assert info.status == 0
        assert np.allclose(r.packed(), ref.packed(), rtol=0, atol=1e-9 * np.abs(ref.packed()).max())


def test_decoupled_mode_reduces_to_bare_rates():
    s = VariationalState([0.6 + 0.1j], [0.3 - 0.7j], [[0.4 - 0.2j, 1.1j]])
    model = Model(QubitParams(1.3, 0.8), [BathMode(0.7, 0.0), BathMode(2.1, 0.0)])
    t = -1.7
    r, _ = solve_derivatives(s, t, model, SolverPolicy(**EXACT))
    A, B = s.A[0], s.B[0]
    h = 1.3 * t / 2
    assert r.A[0] == pytest.approx(-1j * (h * A + 0.4 * B), abs=1e-12)
    assert r.B[0] == pytest.approx(-1j * (-h * B + 0.4 * A), abs=1e-12)
    assert np.allclose(r.f[0], -1j * np.array([0.7, 2.1]) * s.f[0], atol=1e-12)


@pytest.mark.parametrize("method", ["structured", "hermitian", "real"])
def test_displaced_oscillator_closed_form(method):
    # sigma_z coupling in |up>: the single coherent-state ansatz is exact
    w, g, t = 1.9, 1.2, 0.6
    f = 0.35 - 0.8j
    model = Model(QubitParams(1.0, 0.0), [BathMode(w, g, 0.0)])
    s = VariationalState([0.8 * np.exp(0.3j)], [0.0], [[f]])
    r, _ = solve_derivatives(s, t, model, SolverPolicy(method=method, **EXACT))
    assert r.f[0, 0] == pytest.approx(-1j * (w * f + g / 2), abs=1e-12)
    assert r.A[0] == pytest.approx(-1j * s.A[0] * (t / 2 + g * f.real / 2), abs=1e-12)
    assert r.B[0] == 0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), M=st.integers(1, 4), N=st.integers(1, 4), t=st.floats(-10, 10))
def test_conjugation_symmetry(seed, M, N, t):
    # the Hamiltonian is real, so conj(psi) evolves with the conjugate, reversed rate
    s = _spread_state(M, N, seed)
    c = VariationalState(s.A.conj(), s.B.conj(), s.f.conj())
    model = _model(N)
    r, _ = solve_derivatives(s, t, model)
    rc, _ = solve_derivatives(c, t, model)
    scale = max(1.0, np.abs(r.packed()).max())
    assert np.allclose(rc.packed(), -r.packed().conj(), rtol=0, atol=1e-10 * scale)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), M=st.integers(1, 5), N=st.integers(1, 5))
def test_norm_is_stationary(seed, M, N):
    s = random_state(M, N, seed, scale=0.5)
    model = _model(N)
    r, info = solve_derivatives(s, 1.3, model)
    # centred difference of the norm along the computed rate
    h = 1e-5
    up = VariationalState(*(x + h * y for x, y in ((s.A, r.A), (s.B, r.B), (s.f, r.f))))
    dn = VariationalState(*(x - h * y for x, y in ((s.A, r.A), (s.B, r.B), (s.f, r.f))))
    rate = (norm(up) - norm(dn)) / (2 * h)
    scale = norm(s) * max(1.0, np.abs(r.packed()).max())
    assert abs(rate) <= 1e-7 * scale
    assert abs(info.norm_rate) <= 1e-9 * scale


def test_global_phase_covariance():
    s = _spread_state(3, 4, 9)
    u = np.exp(0.77j)
    p = VariationalState(u * s.A, u * s.B, s.f)
    model = _model(4)
    r, _ = solve_derivatives(s, 0.2, model)
    rp, _ = solve_derivatives(p, 0.2, model)
    assert np.allclose(rp.A, u * r.A, atol=1e-12)
    assert np.allclose(rp.B, u * r.B, atol=1e-12)
    assert np.allclose(rp.f, r.f, atol=1e-12)


@pytest.mark.parametrize("method", ["structured", "hermitian", "real"])
def test_sign_flip_covariance_is_exact(method):
    # negation is exact in floating point, so any mismatch would be algorithmic
    s = _spread_state(3, 4, 11)
    p = VariationalState(-s.A, -s.B, s.f)
    pol = SolverPolicy(method=method)
    r, _ = solve_derivatives(s, 0.4, _model(4), pol)
    rp, _ = solve_derivatives(p, 0.4, _model(4), pol)
    assert np.array_equal(rp.A, -r.A) and np.array_equal(rp.B, -r.B)
    assert np.array_equal(rp.f, r.f)


@pytest.mark.parametrize("method", ["structured", "hermitian", "real"])
def test_rank_one_limit_is_finite_and_physical(method):
    model = _model(2)
    s = initialize(3, 2, delta_offset=0.0)
    s.B[0] = 0.3j
    s.f[:] = [0.2, -0.4j]
    r, info = solve_derivatives(s, 0.5, model, SolverPolicy(method=method))
    assert r.is_finite()
    one = VariationalState(s.A[:1], s.B[:1], s.f[:1])
    r1, _ = solve_derivatives(one, 0.5, model, SolverPolicy(method=method))
    # the physical tangent vector d|psi>/dt must agree with the M=1 one
    h = 1e-6

    def tangent(st_, rt):
        up = VariationalState(st_.A + h * rt.A, st_.B + h * rt.B, st_.f + h * rt.f)
        dn = VariationalState(st_.A - h * rt.A, st_.B - h * rt.B, st_.f - h * rt.f)
        return (variational_to_fock(up, 20) - variational_to_fock(dn, 20)) / (2 * h)

    assert np.allclose(tangent(s, r), tangent(one, r1), atol=1e-5)


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        solve_derivatives(random_state(2, 3, 0), 0.0, _model(2))
    with pytest.raises(ConfigError):
        assemble(random_state(2, 3, 0), 0.0, _model(2))


def test_nonfinite_state_raises():
    s = random_state(2, 2, 0)
    s.f[0, 0] = np.nan
    with pytest.raises(NumericalBreakdown) as err:
        solve_derivatives(s, 3.0, _model(2))
    assert err.value.t == 3.0


def test_policy_validation():
    for bad in [dict(tikhonov_eps=0.0), dict(svd_cutoff=-1.0), dict(method="lu"),
                dict(refine_sweeps=-1), dict(ridge_scaling="row")]:
        with pytest.raises(ConfigError):
            SolverPolicy(**bad)
