import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(k: int, ok: bool, detail: str, info: list[str] | None = None):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _VERDICTS.append(line)
        _VERDICTS.extend(f"     criterion {k} info: {s}" for s in info or [])
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
