import numpy as np
import pytest

from dynrmat.dynmat import Point
from dynrmat.elliptic import EllipticContext

TAU = 0.31 + 1.27j
HBAR = 0.17 + 0.03j
GAMMA = 0.23 - 0.05j


@pytest.fixture
def ctx():
    return EllipticContext(TAU)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def generic_q(N, rng=None):
    """Coordinates with well separated differences."""
    rng = np.random.default_rng(7) if rng is None else rng
    base = np.arange(N) * (0.8 / N) + 0.13j * np.arange(N) ** 1.3
    return base + 0.01 * (rng.random(N) + 1j * rng.random(N))


def make_point(N, spec, ctx, q=None, hbar=HBAR, gamma=GAMMA):
    return Point(tuple(complex(s) for s in spec), generic_q(N) if q is None else np.asarray(q, dtype=complex),
                 hbar, gamma, ctx)


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """List collecting ``(number, passed, text)`` for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, text in sorted(lines):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}: {text}")
