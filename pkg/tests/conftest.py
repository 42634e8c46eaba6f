import pytest

_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; returns the bool for asserting."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}"
        _VERDICTS[number] = line + (f" | {detail}" if detail else "")
        print(_VERDICTS[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
