import pytest

_LINES = []


@pytest.fixture(scope="session")
def verdict():
    """Record one summary line per acceptance criterion."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        _LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
