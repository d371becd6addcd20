import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evs.pipeline import synth_scene  # noqa: E402

_acceptance: dict[str, str] = {}


@pytest.fixture(scope="session")
def plane_pair():
    return synth_scene("plane-pair", seed=7)


@pytest.fixture(scope="session")
def sphere_scene():
    return synth_scene("faceted-sphere", seed=3)


@pytest.fixture(scope="session")
def box_scene():
    return synth_scene("textured-box", seed=5, size=96)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance[name] = "PASS" if report.outcome == "passed" else report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_acceptance.items(), key=lambda kv: int(kv[0].split("_")[1][1:])):
        terminalreporter.write_line(f"{outcome:5s} {name}")
