import time

import numpy as np
import pytest

_ACCEPTANCE = []
_START = {}
SUITE_BUDGET_S = 60.0


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _START.get("t", time.perf_counter())
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for name, outcome in _ACCEPTANCE:
            terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
    terminalreporter.write_line(
        f"{'PASS' if elapsed < SUITE_BUDGET_S else 'FAIL'}  suite wall time {elapsed:.1f} s "
        f"(budget {SUITE_BUDGET_S:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _START.get("t", time.perf_counter())
    if elapsed >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_density(rng, dim, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return a + a.conj().T
