import pytest

from twostate.experiments import disappearing_system, three_boxes_system

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def three_boxes():
    return three_boxes_system()


@pytest.fixture
def disappearing():
    return disappearing_system()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test body must finish without raising to PASS."""
    label = request.node.get_closest_marker("criterion").args[0]
    yield
    outcome = "FAIL" if getattr(request.node, "_failed", False) else "PASS"
    _ACCEPTANCE_LINES.append(f"[{outcome}] {label}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and report.failed:
        item._failed = True


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")
