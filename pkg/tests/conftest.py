import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


@st.composite
def states(draw, min_dim=2, max_dim=8, dim=None):
    """Random normalized complex vectors."""
    d = dim if dim is not None else draw(st.integers(min_dim, max_dim))
    re = draw(arrays(np.float64, d, elements=finite))
    im = draw(arrays(np.float64, d, elements=finite))
    psi = re + 1j * im
    norm = np.linalg.norm(psi)
    if norm < 1e-3:
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
        return psi
    return psi / norm


@st.composite
def matrices(draw, dim):
    re = draw(arrays(np.float64, (dim, dim), elements=finite))
    im = draw(arrays(np.float64, (dim, dim), elements=finite))
    return re + 1j * im


@st.composite
def unit_disk(draw):
    r = draw(st.floats(0.0, 1.0))
    phi = draw(st.floats(-np.pi, np.pi))
    return complex(r * np.cos(phi), r * np.sin(phi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def add(criterion: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
