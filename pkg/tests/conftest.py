import numpy as np
import pytest

from critpersist.manifold_bundle import fiber_splitting
from critpersist.persistence_lab import build_scenario, verified_neighborhood
from critpersist.saddle_flow import build_neighborhood


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def circle3():
    return build_scenario("circle3")


@pytest.fixture(scope="session")
def circle3_bundle(circle3):
    return fiber_splitting(circle3.functional, circle3.manifold)


@pytest.fixture(scope="session")
def circle3_verified(circle3):
    # (neighborhood with c0/sigma set, saddle report) for r- = 0.6, r+ = 0.1
    return verified_neighborhood(circle3)


@pytest.fixture(scope="session")
def torus6_nbhd():
    s = build_scenario("torus6")
    b = fiber_splitting(s.functional, s.manifold)
    return s, build_neighborhood(b, s.r_minus, s.r_plus)


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
