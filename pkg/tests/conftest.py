import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_criterion():
    """Register a one-line acceptance verdict, printed at the end of the run."""

    def record(number: int, passed: bool | None, detail: str):
        verdict = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        line = f"criterion {number}: {verdict} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
