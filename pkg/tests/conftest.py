import time

import numpy as np
import pytest

from hybridsched.graph import Dag, Edge

_AC_RESULTS = {}


@pytest.fixture
def seven_node_dfg():
    """Three inputs feed node 4; node 3 and node 4 feed node 6; node 4 feeds node 5."""
    return Dag(7, [Edge(0, 4), Edge(1, 4), Edge(2, 4), Edge(3, 6), Edge(4, 5), Edge(4, 6)])


@pytest.fixture
def diamond():
    return Dag(4, [Edge(0, 1), Edge(0, 2), Edge(1, 3), Edge(2, 3)])


def strict_chain(n, weight=1.0):
    return Dag(n, [Edge(k, k + 1, weight, -1) for k in range(n - 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    n = mark.args[0]
    entry = _AC_RESULTS.setdefault(n, {"ok": True, "tests": [], "seconds": 0.0, "detail": ""})
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry["ok"] = entry["ok"] and rep.outcome == "passed"
        entry["tests"].append(item.name)
        entry["seconds"] += rep.duration
        for key, val in item.user_properties:
            if key == "detail":
                entry["detail"] = val


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_AC_RESULTS):
        e = _AC_RESULTS[n]
        status = "PASS" if e["ok"] else "FAIL"
        detail = f" [{e['detail']}]" if e["detail"] else ""
        tr.write_line(f"AC{n:<2} {status}  {', '.join(e['tests'])} ({e['seconds']:.1f}s){detail}")


@pytest.fixture
def stopwatch():
    class Watch:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.seconds = time.perf_counter() - self.t0

    return Watch
