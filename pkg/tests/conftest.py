import math

import pytest

from loophole_lab.models import DetectorModel

ACCEPTANCE_LOG: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    """Log one acceptance line, then fail the test if it did not pass."""
    ACCEPTANCE_LOG.append((criterion, bool(passed), detail))
    assert passed, f"{criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_LOG:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


@pytest.fixture
def caps75():
    return DetectorModel.equal_caps(math.radians(75))
