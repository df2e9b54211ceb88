import os

os.environ.setdefault("NUMBA_NUM_THREADS", "1")

import pytest  # noqa: E402

_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, title, ok, detail=""):
        line = f"CRITERION {number:>2} [{'PASS' if ok else 'FAIL'}] {title}" + (f" :: {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
