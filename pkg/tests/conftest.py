import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        _LINES[number] = f"[{'PASS' if ok else 'FAIL'}] acceptance {number:2d}: {title}" + (
            f" | {detail}" if detail else "")
        print(_LINES[number])
        assert ok, _LINES[number]

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
