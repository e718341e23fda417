import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, spread=1.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.exp(spread * rng.standard_normal(d))
    return (q * lam) @ q.T


def random_sym(rng, d, scale=1.0):
    a = scale * rng.standard_normal((d, d))
    return 0.5 * (a + a.T)


ACCEPTANCE_LINES = []


def report(number, title, passed, detail):
    """Record one acceptance line; it is printed now and repeated in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
