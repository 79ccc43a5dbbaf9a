import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def report(request):
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def emit(label: str, ok: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'} | {detail}"
        lines.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
