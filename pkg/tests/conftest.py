from pathlib import Path

import pytest

from betaforge.features import write_bundled_digits


@pytest.fixture(scope="session")
def digits_csv(tmp_path_factory) -> Path:
    """UCI optical digits (scikit-learn's bundled copy) as a CSV file."""
    return write_bundled_digits(tmp_path_factory.mktemp("data") / "digits.csv")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
