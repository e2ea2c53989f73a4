import os

from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# acceptance verdicts, filled by tests/test_acceptance.py
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
