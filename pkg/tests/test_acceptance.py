"""Every acceptance criterion at its stated tolerance.

The criteria are computed once per session (see ``conftest.py``); each test
prints its pass/fail line, and the terminal summary repeats all of them with
the measured values.
"""

from __future__ import annotations

import pytest

from fracsrc import io
from fracsrc.acceptance import CRITERIA, report
from fracsrc.cli import main


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_results):
    r = acceptance_results[number]
    print(r.line())
    failing = [f"{c.name}: {c.value:.6g} {c.relation} {c.limit:g}" for c in r.checks if not c.passed]
    assert r.passed, "; ".join(failing)


def test_all_criteria_have_checks(acceptance_results):
    assert sorted(acceptance_results) == sorted(CRITERIA)
    assert all(len(r.checks) > 0 for r in acceptance_results.values())


def test_cli_report_matches_library(acceptance_results, tmp_path):
    out = tmp_path / "report.json"
    assert main(["report", "--criteria", "10", "--out", str(out)]) == 0
    assert out.read_bytes() == io.dumps(report([acceptance_results[10]])).encode()
