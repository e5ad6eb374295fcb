import logging
import math
import re

import pytest

from ssris.config import bundled_config
from ssris.rectifier import bundled_model


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="ssris")


@pytest.fixture(scope="session")
def scenario1():
    return bundled_config("scenario1")


@pytest.fixture(scope="session")
def rectifier():
    return bundled_model()


@pytest.fixture(scope="session")
def small_scenario(scenario1):
    """100 cells and a small far coverage area: codebooks of a few dozen entries."""
    return scenario1.replace(n_uc=100, area_center=(-10.0, -5.0, 60.0), area_width_y=10.0,
                             area_height_z=6.0, d_inc=5.0)


def _criterion_order(line):
    match = re.search(r"\] C(\d+)([a-z]?)", line)
    return (int(match.group(1)), match.group(2)) if match else (math.inf, line)


def pytest_terminal_summary(terminalreporter):
    lines = [value for reports in terminalreporter.stats.values() for rep in reports
             if getattr(rep, "when", None) == "call"
             for key, value in getattr(rep, "user_properties", ()) if key == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_order):
            terminalreporter.write_line(line)
