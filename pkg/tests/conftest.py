from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from linksparse import ConflictGraph, fit_ecdf, generate_er, kernels

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BACKENDS = kernels.available_backends()

# criterion number -> (title, passed, seconds, detail)
ACCEPTANCE: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    number, title = mark.args
    detail = getattr(item, "acceptance_detail", "")
    ACCEPTANCE[number] = [title, rep.passed, rep.duration, detail]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, ok, secs, detail = ACCEPTANCE[k]
        line = f"{'PASS' if ok else 'FAIL'} {k}. {title} [{secs:.1f}s]"
        terminalreporter.write_line(line + (f" {detail}" if detail else ""))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to an acceptance test's report line."""
    def put(text: str) -> None:
        request.node.acceptance_detail = text
    return put


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def k3():
    return ConflictGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def p3():
    return ConflictGraph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def star3():
    return ConflictGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture(scope="session")
def gamma_ecdf():
    """Smooth eCDF on a continuous positive sample (no atoms)."""
    samples = np.random.default_rng(123).gamma(2.0, 100.0, size=20_000)
    return fit_ecdf(samples)


@pytest.fixture
def er30():
    return generate_er(30, 5, seed=7)
