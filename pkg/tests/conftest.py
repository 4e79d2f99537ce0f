import sys
import numpy as np
import pytest

from lowps import LowRankFactors


def gaussian_factors(d, r, rng, complex_=True):
    if complex_:
        u = (rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))) / np.sqrt(2 * d)
        v = (rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))) / np.sqrt(2 * d)
    else:
        u = rng.standard_normal((d, r)) / np.sqrt(d)
        v = rng.standard_normal((d, r)) / np.sqrt(d)
    return LowRankFactors(u, v)


def rank_one(c=0.5, d=5):
    e1 = np.zeros((d, 1))
    e1[0] = 1
    return LowRankFactors(c * e1, e1)


def normal_factors(d, radii, rng):
    """U = Q diag(radii), V = Q for a random orthonormal Q."""
    q, _ = np.linalg.qr(rng.standard_normal((d, len(radii))))
    return LowRankFactors(q * np.asarray(radii), q)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
