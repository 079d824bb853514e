import time

import numpy as np
import pytest

from pesinlab import (
    build_doubling,
    build_example1,
    build_example2,
    build_reference_affine,
    build_torus,
)


@pytest.fixture(scope="session")
def doubling():
    return build_doubling()


@pytest.fixture(scope="session")
def ex1():
    return build_example1()


@pytest.fixture(scope="session")
def ex2():
    return build_example2()


@pytest.fixture(scope="session")
def affine3():
    return build_reference_affine()


@pytest.fixture(scope="session")
def torus(ex1, ex2):
    return build_torus(ex1, ex2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one criterion's outcome and runtime for the end-of-run summary."""
    log = request.config.stash.setdefault(ACCEPTANCE, [])

    class Recorder:
        def __init__(self):
            self.criterion = None
            self.budget = None
            self.detail = ""

        def start(self, criterion, budget):
            self.criterion, self.budget = criterion, budget
            self.t0 = time.perf_counter()

        @property
        def elapsed(self):
            return time.perf_counter() - self.t0

    rec = Recorder()
    yield rec
    if rec.criterion is not None:
        failed = getattr(request.node, "rep_call", None)
        ok = failed is not None and failed.passed
        log.append((rec.criterion, ok, rec.elapsed, rec.budget, rec.detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(ACCEPTANCE, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, elapsed, budget, detail in sorted(log):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {criterion:>2}: {status}  {elapsed:7.2f}s (budget {budget:g}s)  {detail}")
