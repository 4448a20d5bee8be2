import time

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    n, title = marker.args
    entry = _RESULTS.setdefault(n, {"title": title, "passed": True, "details": []})
    entry["passed"] &= report.passed
    entry["details"].extend(v for k, v in report.user_properties if k == "measured")
    entry.setdefault("seconds", 0.0)
    entry["seconds"] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        status = "PASS" if e["passed"] else "FAIL"
        detail = "; ".join(e["details"])
        tr.write_line(f"[{status}] {n:2d}. {e['title']} ({e['seconds']:.2f} s){': ' + detail if detail else ''}")


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.fixture
def timer():
    return Timer()
