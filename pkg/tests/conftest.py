import numpy as np
import pytest
from scipy.linalg import expm

from margulis_spectra.families import SeededFamily, build_family
from margulis_spectra.linalg_core import make_quadratic_space
from margulis_spectra.spectrum import build_table


def random_lie_algebra(n, rng, scale=1.0):
    """Random element X of so(n, n+1): X^t Q + Q X = 0."""
    d = 2 * n + 1
    K = rng.standard_normal((d, d))
    K = (K - K.T) / 2  # skew
    Q = make_quadratic_space(n).q_matrix
    return scale * Q @ K


def random_group_element(n, rng, scale=1.0):
    return expm(random_lie_algebra(n, rng, scale))


def boost(lam):
    c, s = (lam + 1 / lam) / 2, (lam - 1 / lam) / 2
    return np.array([[c, s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation(theta):
    """Elliptic element of SO_0(1, 2): rotation of the negative plane."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


@pytest.fixture(scope="session")
def seeded_rep():
    return build_family(SeededFamily())


@pytest.fixture(scope="session")
def seeded_table8(seeded_rep):
    return build_table(seeded_rep, 8)


@pytest.fixture(scope="session")
def seeded_table10(seeded_rep):
    return build_table(seeded_rep, 10)


#: (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE = []


def record_criterion(number, title, passed, detail):
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
