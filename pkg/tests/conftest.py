import os
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion; returns the verdict."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


@pytest.fixture(scope="session")
def acceptance_dir():
    """Where acceptance runs leave history curves and figures for inspection."""
    root = Path(os.environ.get("ANISOTIK_ACCEPTANCE_OUT", Path(__file__).resolve().parents[1] / "acceptance_out"))
    root.mkdir(parents=True, exist_ok=True)
    return root


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
