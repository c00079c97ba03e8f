import pytest

# Lines recorded by the acceptance suite, echoed in the terminal summary so
# they are visible even when test output is captured.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
