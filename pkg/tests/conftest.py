import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from topobohm.geometry import Geometry, build_grid

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(20240611)))


@pytest.fixture(scope="session")
def ring256():
    return build_grid(Geometry("ring", (256,)))


@pytest.fixture(scope="session")
def annulus_small():
    return build_grid(Geometry("annulus", (24, 48), r_in=1.0, r_out=2.0))


@pytest.fixture(scope="session")
def spin_small():
    return build_grid(Geometry("spin_annulus", (24, 48), r_in=1.0, r_out=2.0))


@pytest.fixture(scope="session")
def anyon_small():
    return build_grid(Geometry("two_anyon", (24, 48), r_in=1.0, r_out=2.0))


def phase(beta):
    return np.exp(1j * beta)


TWO_PI = 2 * math.pi


# acceptance verdicts, printed once at the end of the session
VERDICTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def verdict(request):
    """Record the outcome of one acceptance criterion: ``verdict(k, detail)``."""
    seen = {}

    def record(k: int, detail: str = "") -> None:
        seen["k"], seen["detail"] = k, detail

    yield record
    if "k" in seen:
        failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
        VERDICTS.setdefault(seen["k"], []).append((not failed, seen["detail"]))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        parts = VERDICTS[k]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts if p[1])
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
