import numpy as np
import pytest

from dissipative_lz import VariationalState, norm


def random_state(M, N, seed, scale=0.6):
    rng = np.random.default_rng(seed)
    c = lambda *shape: rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return VariationalState(c(M), c(M), scale * c(M, N), t=0.0)


def normalised(state):
    s = np.sqrt(norm(state))
    return VariationalState(state.A / s, state.B / s, state.f, state.t)


@pytest.fixture
def rand_state():
    return random_state


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
