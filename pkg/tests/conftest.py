import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_energy(n, h, couplers, config, offset=0.0):
    """Term-by-term sum, independent of the package's vectorised code."""
    e = offset
    for i in range(n):
        e -= h[i] * config[i]
    for i, j, v in couplers:
        e -= v * config[i] * config[j]
    return e


def all_configs(n):
    return [np.array(c, dtype=np.int8) for c in itertools.product((1, -1), repeat=n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS = {}


def record_criterion(number, name, ok, detail=""):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
