from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_RESULTS: list = []


@pytest.fixture(scope="session")
def acceptance_results():
    """All acceptance criteria, computed once per session."""
    from fracsrc.acceptance import run_all

    if not _RESULTS:
        _RESULTS.extend(run_all())
    return {r.number: r for r in _RESULTS}


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for r in _RESULTS:
        terminalreporter.write_line(r.line())
        for c in r.checks:
            mark = "ok " if c.passed else "BAD"
            terminalreporter.write_line(f"    {mark} {c.name}: {c.value:.6g} {c.relation} {c.limit:g}")
