import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "bbmsim",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("bbmsim")


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance: long-running end-to-end criteria (deselect with -m 'not acceptance')",
    )


# One line per acceptance criterion, printed after the run so the verdicts
# survive even when an individual assertion trips.
_ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_log():
    def record(number, status, detail):
        _ACCEPTANCE_LINES[number] = (status, detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    tw = terminalreporter
    tw.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        status, detail = _ACCEPTANCE_LINES[number]
        tw.write_line(f"[A{number:02d}] {status.upper()} — {detail}")
