"""Shared fixtures and builders for the docqe test suite."""

from __future__ import annotations

import pytest

from docqe.segmentation import SegmentedDoc, segment

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
    # One PASS/FAIL line per acceptance criterion, whatever the verbosity.
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for label, status in _acceptance_results.items():
        terminalreporter.write_line(f"{status}  {label}")


def doc(text: str, lang: str = "en") -> SegmentedDoc:
    return segment(text, lang)


@pytest.fixture
def en_doc() -> SegmentedDoc:
    return doc("First sentence here. Second one follows. A third closes it.")


@pytest.fixture
def ja_doc() -> SegmentedDoc:
    return doc("最初の文です。次の文が続きます。三つ目で終わります。", "ja")
