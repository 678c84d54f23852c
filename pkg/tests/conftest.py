import random

import pytest
from hypothesis import HealthCheck, settings

from mcabe.actors import Harness

# pairings cost tens of milliseconds in pure Python
settings.register_profile(
    "mcabe", deadline=None, suppress_health_check=[HealthCheck.too_slow], print_blob=True
)
settings.load_profile("mcabe")

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion covered by a test")


def _entry(num: str, title: str) -> dict:
    return _criteria.setdefault(num, {"title": title, "passed": True, "seen": False, "info": {}})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    e = _entry(*m.args)
    if rep.when == "call":
        e["seen"] = True
        e["info"].update(getattr(item, "criterion_info", {}))
    if rep.failed:
        e["seen"] = True
        e["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria, key=int):
        e = _criteria[num]
        status = "PASS" if e["passed"] and e["seen"] else ("FAIL" if e["seen"] else "NOT RUN")
        extra = "; ".join(f"{k}={v}" for k, v in e["info"].items())
        line = f"criterion {num}: {status} - {e['title']}"
        if extra:
            line += f" ({extra})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return random.Random(20240611)


@pytest.fixture
def harness(tmp_path, rng):
    clock = {"now": 1_000_000}
    h = Harness.create(rng, tmp_path / "store", clock=lambda: clock["now"], record_secrets=True)
    h.test_clock = clock
    return h


@pytest.fixture
def record(request):
    """Attach key=value facts to the acceptance summary line of the running test."""

    def put(**kw):
        request.node.criterion_info = {**getattr(request.node, "criterion_info", {}), **kw}

    return put


@pytest.fixture(scope="session")
def keygen_table():
    """Keygen timings at 10..50 attributes, measured once per session."""
    import time

    from mcabe import bench

    t0 = time.perf_counter()
    results = bench.bench_keygen(range(10, 51, 5), samples=30, seed=0)
    return results, time.perf_counter() - t0
