import math

import pytest

from dressed_limit import corpus
from dressed_limit.scheme import (
    Laser,
    Level,
    LevelScheme,
    MeasurementContext,
    Transition,
    parse_scheme,
)

K780 = 2 * math.pi / 780e-9
CONTEXT = MeasurementContext(column_density=1e13, area=1e-8, bandwidth=1e6, efficiency=0.9)


def two_level(delta=10.0, rabi=2.0, gamma=1.0, k=K780, power=None, context=CONTEXT):
    """Two-level atom in units where gamma = 1 unless stated otherwise."""
    return LevelScheme(
        levels=[Level(1, 0.0), Level(2, delta, gamma)],
        lasers=[Laser(1, k, power)],
        transitions=[Transition(1, 1, 2, rabi)],
        context=context,
    )


def lambda_scheme(delta=50.0, two_photon=0.0, rabi_a=3.0, rabi_b=4.0, gamma=1.0):
    """Lasers a: 1-2 and b: 3-2 sharing the decaying level 2."""
    return LevelScheme(
        levels=[Level(1, 0.0), Level(2, delta, gamma), Level(3, two_photon)],
        lasers=[Laser(1, K780), Laser(2, K780 * 1.00001)],
        transitions=[Transition(1, 1, 2, rabi_a), Transition(2, 3, 2, rabi_b)],
        context=CONTEXT,
    )


def load(name):
    return parse_scheme(corpus.read(name))


@pytest.fixture
def corpus_scheme():
    return load


# --- acceptance summary ----------------------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
