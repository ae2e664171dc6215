from __future__ import annotations

import time

import pytest

from multirotor.aero import Aero, AeroConstants, default_maps
from multirotor.config import load_config, shipped_config
from multirotor.dynamics import RotorUnitParams
from multirotor.simkit import ControlSettings, design_controllers, run_scenario

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")


@pytest.fixture(scope="session")
def aero() -> Aero:
    return Aero(AeroConstants(), default_maps())


@pytest.fixture(scope="session")
def rotor() -> RotorUnitParams:
    return RotorUnitParams()


@pytest.fixture(scope="session")
def control() -> ControlSettings:
    return ControlSettings()


@pytest.fixture(scope="session")
def design(rotor, aero, control):
    return design_controllers(rotor, aero, control)


def _scenario(name):
    return load_config(shipped_config(), name).sim


@pytest.fixture(scope="session")
def scenario():
    """Loads a named scenario of the shipped config."""
    return _scenario


@pytest.fixture(scope="session")
def timed_run():
    """run_scenario with result caching per scenario name; returns (trace, sim, seconds)."""
    cache = {}

    def run(name):
        if name not in cache:
            sim = _scenario(name)
            t0 = time.perf_counter()
            trace = run_scenario(sim)
            cache[name] = (trace, sim, time.perf_counter() - t0)
        return cache[name]

    return run
