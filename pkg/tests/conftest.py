import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from necklab.lab import load_scenario, run_scenario  # noqa: E402

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def _ledger(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_scenario(load_scenario(SCENARIOS / f"{name}.scn"))


@pytest.fixture(scope="session")
def ledger_w2():
    return _ledger("winding_w2")


@pytest.fixture(scope="session")
def ledger_w1():
    return _ledger("winding_w1")


@pytest.fixture(scope="session")
def ledger_neck():
    return _ledger("neck_d2")


@pytest.fixture(scope="session")
def ledger_wrap():
    return _ledger("theta_wrap")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
