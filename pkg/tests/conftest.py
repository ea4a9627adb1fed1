import pytest

_ACCEPTANCE = {}


class AcceptanceReport:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, criterion, passed, detail):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceReport()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda c: (int(str(c).split("-")[0]), str(c))):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
