import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gm2lab import gm2, objectives

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def admissible_draw(rng, L=None, mu=None):
    """Random (L, mu, s, params) satisfying the discrete contraction hypotheses.

    q is bounded by sqrt(mu / (s L)) so that [q/mu, 1/(q s L)] is a non-empty
    range for p, and m sqrt(s) is then drawn from [q p s, 1/L].
    """
    if L is None:
        L = rng.uniform(0.5, 10.0)
    if mu is None:
        mu = L / 10 ** rng.uniform(0.3, 4.0)
    s = 10 ** rng.uniform(-2.0, 0.5) / L
    q = rng.uniform(0.05, 1.0) * min(math.sqrt(mu / (s * L)), 0.999 / math.sqrt(s))
    p = rng.uniform(q / mu, 1.0 / (q * s * L))
    m_rs = rng.uniform(q * p * s, 1.0 / L)
    return L, mu, s, gm2.Gm2Params(m_rs / math.sqrt(s), q, p, q)


def random_diag_quadratic(rng, mu, L, dim_max=10):
    d = int(rng.integers(1, dim_max + 1))
    diag = rng.uniform(mu, L, d)
    diag[0] = mu
    if d > 1:
        diag[-1] = L
    return objectives.make_quadratic(diag)


@pytest.fixture
def fig1_logistic():
    return objectives.make_logistic_1d(1.0, 0.01)


@pytest.fixture
def fig2_quadratic():
    return objectives.make_quadratic([5e-3, 1.0])


@pytest.fixture(scope="session")
def fig3_logistic():
    return objectives.random_reg_logistic(1000, 10, 1e-3, seed=0)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; call it before asserting so failures are listed too."""
    def record(number, ok, detail=""):
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
