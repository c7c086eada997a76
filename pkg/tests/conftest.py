import pytest

ACCEPTANCE = []


@pytest.fixture
def record():
    """Log one acceptance line; the lines are repeated in the terminal summary."""

    def _record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}: {detail}"
        ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
