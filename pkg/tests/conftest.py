import pytest

_LINES = []


class AcceptanceLog:
    """Collects one PASS/FAIL line per acceptance check."""

    def record(self, criterion: str, ok, detail: str = "") -> bool:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[None if ok is None else bool(ok)]
        line = f"{status} criterion {criterion}: {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
