import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from rdhyst.scenario import load_scenario
from rdhyst.solver import run

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

_ACCEPTANCE = {}


class _Criterion:
    """Context manager recording one acceptance criterion's outcome."""

    def __init__(self, number, title):
        self.number = number
        self.title = title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACCEPTANCE[self.number] = (self.title, exc_type is None)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number:2d}: {verdict} - {title}")


@pytest.fixture(scope="session")
def reference_scenario():
    return load_scenario(SCENARIO_DIR / "reference.scn")


@pytest.fixture(scope="session")
def tangency_scenario():
    return load_scenario(SCENARIO_DIR / "tangency.scn")


@pytest.fixture(scope="session")
def smooth_scenario():
    return load_scenario(SCENARIO_DIR / "smooth.scn")


@pytest.fixture(scope="session")
def reference_run(reference_scenario):
    """The reference splitting run, shared across acceptance criteria."""
    sc = reference_scenario
    state, report, snaps = run(sc.model, sc.build_initial(), sc.t_final,
                               sc.config, snapshot_times=sc.snapshot_times)
    return state, report, snaps


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
