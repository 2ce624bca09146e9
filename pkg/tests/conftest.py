import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, with the measured values."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::" not in getattr(rep, "nodeid", "") or rep.when != "call" and outcome != "error":
                continue
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            name = rep.nodeid.split("::")[-1]
            rows.append((name, "PASS" if outcome == "passed" else "FAIL", detail))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, status, detail in sorted(rows):
            terminalreporter.write_line(f"{status}  {name}  {detail}")
