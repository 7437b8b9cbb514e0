import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.fixture
def announce(request, capfd):
    """Record and print one pass/fail line per acceptance criterion."""

    def _announce(name: str):
        request.node._acceptance_name = name

    yield _announce


def pytest_runtest_makereport(item, call):
    if call.when != "call":
        return
    name = getattr(item, "_acceptance_name", None)
    if name is None:
        return
    outcome = "PASS" if call.excinfo is None else "FAIL"
    _ACCEPTANCE_RESULTS.append((name, outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{outcome}] {name}")
