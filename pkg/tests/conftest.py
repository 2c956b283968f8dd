import re

import numpy as np
import pytest

from photoncert.hbt_simulator import DetectorConfig, count_coincidences, simulate_pulse_train
from photoncert.photon_model import Poisson, Thermal

ACCEPTANCE_PULSES = 10_000_000
ACCEPTANCE_EFFICIENCY = 0.005
ACCEPTANCE_SEED = 20240607

_results: dict[str, list[tuple[str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = str(marker.args[0])
    failed = report.failed
    if report.when == "call" or (report.when == "setup" and failed):
        _results.setdefault(label, []).append((item.name, "FAIL" if failed else "PASS"))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    def order(label):
        number, suffix = re.fullmatch(r"(\d+)(.*)", label).groups()
        return int(number), suffix

    for label in sorted(_results, key=order):
        for name, verdict in _results[label]:
            terminalreporter.write_line(f"criterion {label}: {verdict}  ({name})")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _simulated_counts(source):
    cfg = DetectorConfig(ACCEPTANCE_EFFICIENCY)
    return count_coincidences(simulate_pulse_train(source, ACCEPTANCE_PULSES, cfg, ACCEPTANCE_SEED))


@pytest.fixture(scope="session")
def poisson_counts_1e7():
    return _simulated_counts(Poisson(0.42))


@pytest.fixture(scope="session")
def thermal_counts_1e7():
    return _simulated_counts(Thermal(0.42))
