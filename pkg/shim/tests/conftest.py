"""Shared helpers for the shim suite, plus acceptance summary lines."""

from __future__ import annotations

import pytest

_acceptance_results: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    label = getattr(item.function, "acceptance_criterion", None)
    if label is not None and report.when == "call":
        if report.passed and _acceptance_results.get(label) != "FAIL":
            _acceptance_results[label] = "PASS"
        elif not report.passed:
            _acceptance_results[label] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "shim acceptance criteria")
    for label, status in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"{status}  {label}")
