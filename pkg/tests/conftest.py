"""Shared pytest hooks: the acceptance suite's one-line verdicts are
collected here and repeated in the terminal summary."""

from typing import List, Tuple

import pytest

CRITERIA: List[Tuple[int, str, bool, str]] = []


@pytest.fixture
def verdict():
    """``verdict(number, title, ok, detail)`` records and prints one line,
    then fails the test when ``ok`` is false."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        CRITERIA.append((number, title, ok, detail))
        print(f"\nCRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(CRITERIA):
        terminalreporter.write_line(f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
