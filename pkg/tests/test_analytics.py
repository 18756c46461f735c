import math

import pytest
from hypothesis import given, strategies as st

from dissipative_lz import DomainError, lz_standard, multimode_final, single_mode_final


def test_lz_standard_values():
    assert lz_standard(0.0) == 0.0
    assert lz_standard(1.2) == pytest.approx(1 - math.exp(-math.pi * 1.44 / 2), abs=1e-15)
    assert lz_standard(1.2) == pytest.approx(0.8959, abs=5e-5)
    assert lz_standard(0.4) == pytest.approx(0.2220, abs=5e-4)
    assert lz_standard(50.0) == 1.0


def test_single_mode_values():
    assert single_mode_final(0.0, 0.0) == 0.0
    assert single_mode_final(0.5, 1.2) == pytest.approx(0.9297, abs=5e-5)
    assert single_mode_final(0.0, 1.2) == lz_standard(1.2)


def test_multimode_reductions():
    for d in (0.0, 0.4, 1.1):
        assert multimode_final(d, 1.0, 0.0, 0.37, 0.05) == pytest.approx(lz_standard(d), abs=1e-15)
    assert multimode_final(0.0, 1.0, math.pi / 2, 1.44, 0.144) == pytest.approx(single_mode_final(0, 1.2),
                                                                             abs=1e-15)


@pytest.mark.parametrize("fn,args", [(lz_standard, (0.3, 0.0)), (lz_standard, (0.3, -1.0)),
                                     (single_mode_final, (0.3, 0.1, 0.0)),
                                     (multimode_final, (0.3, 0.0, 1.0, 0.1, 0.1)),
                                     (multimode_final, (0.3, 1.0, 1.0, -0.1, 0.1))])
def test_domain_errors(fn, args):
    with pytest.raises(DomainError):
        fn(*args)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.1, 10))
def test_symmetry_and_bounds(d, g, v):
    p = single_mode_final(d, g, v)
    assert 0.0 <= p <= 1.0
    assert p == single_mode_final(g, d, v)
    assert p == pytest.approx(lz_standard(math.hypot(d, g), v), abs=1e-14)


@given(st.floats(0, 3), st.floats(0, 3))
def test_lz_monotone(a, b):
    lo, hi = sorted((a, b))
    assert lz_standard(lo) <= lz_standard(hi)


@given(st.floats(0.0, math.pi / 2), st.floats(0.0, 2.0))
def test_multimode_bounds(theta, S):
    assert 0.0 <= multimode_final(0.0, 1.0, theta, S, 0.0) <= 1.0
