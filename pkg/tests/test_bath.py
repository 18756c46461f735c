import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from dissipative_lz import (BathMode, ConfigError, Continuum, DomainError, ExplicitModes, Model,
                            QubitParams, SpectralDensity, discretize_linear, discretize_logarithmic,
                            evaluate_spectral_density, integrated_quantities, resolve_modes)


def test_density_point_values():
    ohmic = SpectralDensity(0.002, 1.0, 10.0)
    assert evaluate_spectral_density(ohmic, 0.0) == 0.0
    assert evaluate_spectral_density(ohmic, 10.0) == pytest.approx(2 * 0.002 * 10 * math.exp(-1), rel=1e-14)
    sup = SpectralDensity(0.002, 2.0, 10.0)
    assert evaluate_spectral_density(sup, 10.0) == pytest.approx(0.014715177646857694, rel=1e-12)


def test_density_vectorised_and_domain():
    sd = SpectralDensity(0.01, 0.5, 3.0)
    w = np.linspace(0, 20, 7)
    assert np.allclose(sd(w), [sd(x) for x in w])
    with pytest.raises(DomainError):
        evaluate_spectral_density(sd, -1.0)


@pytest.mark.parametrize("kw", [dict(alpha=-1), dict(alpha=0.1, s=0), dict(alpha=0.1, omega_c=0)])
def test_density_rejects_bad_parameters(kw):
    with pytest.raises(ConfigError):
        SpectralDensity(**kw)


def test_linear_grid_zero_coupling():
    modes = discretize_linear(SpectralDensity(0.0, 1.3), 10, 50.0)
    assert len(modes) == 10
    assert all(m.gamma == 0 for m in modes)


def test_linear_single_bin():
    sd = SpectralDensity(0.002, 1.0, 10.0)
    (m,) = discretize_linear(sd, 1, 2 * 7.0)
    assert m.omega == pytest.approx(7.0)
    assert m.gamma ** 2 == pytest.approx(sd(7.0) * 14.0, rel=1e-13)


def test_linear_grid_converges_to_integral():
    sd = SpectralDensity(0.002, 1.0, 10.0)
    # closed form 2 alpha w_c^2 (1 - e^-5 (1 + 5)) and adaptive quadrature are independent routes
    exact = 2 * 0.002 * 100 * (1 - math.exp(-5) * 6)
    quad, _ = integrate.quad(sd, 0, 50)
    assert quad == pytest.approx(exact, rel=1e-10)
    S, _ = integrated_quantities(discretize_linear(sd, 2000, 50.0))
    assert S == pytest.approx(exact, rel=1e-5)
    S100, _ = integrated_quantities(discretize_linear(sd, 100, 50.0))
    assert S100 == pytest.approx(exact, rel=1e-3)


@pytest.mark.parametrize("bad", [dict(n=0, omega_max=5.0), dict(n=3, omega_max=0.0)])
def test_linear_grid_errors(bad):
    with pytest.raises(ConfigError):
        discretize_linear(SpectralDensity(0.01), bad["n"], bad["omega_max"])


def test_logarithmic_single_bin_carries_full_weight():
    sd = SpectralDensity(0.002, 0.5, 10.0)
    (m,) = discretize_logarithmic(sd, 1, 0.01, 50.0)
    full, _ = integrate.quad(sd, 0.01, 50.0, epsrel=1e-12)
    first, _ = integrate.quad(lambda w: w * sd(w), 0.01, 50.0, epsrel=1e-12)
    assert m.gamma ** 2 == pytest.approx(full, rel=1e-9)
    assert m.omega == pytest.approx(first / full, rel=1e-9)


def test_logarithmic_partitions_integral():
    sd = SpectralDensity(0.002, 1.5, 10.0)
    modes = discretize_logarithmic(sd, 40, 0.001, 50.0)
    full, _ = integrate.quad(sd, 0.001, 50.0, epsrel=1e-12)
    S, _ = integrated_quantities(modes)
    assert S == pytest.approx(full, rel=1e-9)
    w = [m.omega for m in modes]
    assert np.all(np.diff(w) > 0)


@pytest.mark.parametrize("lo,hi", [(1.0, 1.0), (2.0, 1.0), (0.0, 3.0)])
def test_logarithmic_edge_errors(lo, hi):
    with pytest.raises(ConfigError):
        discretize_logarithmic(SpectralDensity(0.01), 4, lo, hi)


def test_integrated_quantities():
    assert integrated_quantities([BathMode(1.0, 0.0), BathMode(2.0, 0.0)]) == (0.0, 0.0)
    S, E0 = integrated_quantities([BathMode(10.0, 1.2)])
    assert S == pytest.approx(1.44)
    assert E0 == pytest.approx(0.144)


def test_mode_validation():
    with pytest.raises(ConfigError):
        BathMode(0.0, 1.0)
    with pytest.raises(ConfigError):
        BathMode(1.0, -1.0)
    with pytest.raises(ConfigError):
        BathMode(1.0, 1.0, 2.0)
    with pytest.raises(ConfigError):
        Model(QubitParams(), [BathMode(2.0, 1.0), BathMode(1.0, 1.0)])
    with pytest.raises(ConfigError):
        QubitParams(v=0.0)
    with pytest.raises(ConfigError):
        QubitParams(delta=-0.1)


def test_resolve_modes_default_grid():
    c = Continuum(SpectralDensity(0.002, 1.0, 10.0), 80)
    modes = resolve_modes(c)
    assert len(modes) == 80
    assert modes[-1].omega == pytest.approx(50.0 - 50.0 / 160)
    assert resolve_modes(ExplicitModes([BathMode(3.0, 1.0)]))[0].omega == 3.0


def test_model_arrays_pure_offdiagonal_is_exact():
    w, cq, sq = Model(QubitParams(), [BathMode(1.0, 0.7)]).arrays
    assert cq[0] == 0.0
    assert sq[0] == 0.7


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1e-4, 0.1), s=st.floats(0.2, 3.0), wc=st.floats(0.5, 20.0),
       n=st.integers(1, 60))
def test_linear_grid_properties(alpha, s, wc, n):
    sd = SpectralDensity(alpha, s, wc)
    modes = discretize_linear(sd, n, 5 * wc)
    w = np.array([m.omega for m in modes])
    g = np.array([m.gamma for m in modes])
    assert np.all(np.diff(w) > 0) and np.all(w > 0) and np.all(w < 5 * wc)
    assert np.all(g >= 0)
    # squared couplings are J * dw exactly on the midpoint grid
    assert np.allclose(g ** 2, sd(w) * 5 * wc / n, rtol=1e-12, atol=0)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1e-4, 0.1), s=st.floats(0.2, 3.0), wc=st.floats(0.5, 20.0),
       n=st.integers(1, 30))
def test_logarithmic_centroids_inside_bins(alpha, s, wc, n):
    sd = SpectralDensity(alpha, s, wc)
    modes = discretize_logarithmic(sd, n, 1e-3 * wc, 5 * wc)
    from dissipative_lz.bath import log_edges
    edges = log_edges(1e-3 * wc, 5 * wc, n)
    w = np.array([m.omega for m in modes])
    assert np.all(w >= edges[:-1] * (1 - 1e-12)) and np.all(w <= edges[1:] * (1 + 1e-12))
