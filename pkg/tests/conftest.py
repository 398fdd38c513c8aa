import mpmath
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def charpoly_oracle(A, dps=50):
    """det(sI - A) coefficients by Faddeev-LeVerrier in high precision.

    Shares no code with the package: trace recurrences in mpmath.
    """
    mpmath.mp.dps = dps
    n = len(A)
    M = mpmath.matrix([[mpmath.mpf(float(x)) for x in row] for row in A])
    coeffs = [mpmath.mpf(1)]
    Mk = mpmath.zeros(n, n)
    eye = mpmath.eye(n)
    for k in range(1, n + 1):
        Mk = M * Mk + coeffs[-1] * eye
        AM = M * Mk
        tr = sum(AM[i, i] for i in range(n))
        coeffs.append(-tr / k)
    return np.array([float(c) for c in coeffs])


def rel_err(x, y):
    return float(np.linalg.norm(np.asarray(x) - np.asarray(y)) / np.linalg.norm(y))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def record_criterion(number, title, passed, detail):
    line = f"CRITERION {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
