from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from drsmooth.appliances import Appliance, HouseholdSpec, TimeHorizon
from drsmooth.scenario import GeneratorRanges, Scenario
from drsmooth.subproblem import AggregatorCostModel

FIXTURES = Path(__file__).parent / "fixtures"

# Small ranges keep joint choice spaces within brute-force reach.
SMALL = GeneratorRanges(ni_duration=(1, 3), int_duration=(1, 3), power_tenths=(2, 30), window_slack=1)

# Filled in by test_acceptance.py, printed after the run.
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


def random_household(rng: np.random.Generator, hid: str, T: int, n_apps: int, max_width: int = 6) -> HouseholdSpec:
    apps = []
    for j in range(n_apps):
        lo = int(rng.integers(0, T))
        hi = int(rng.integers(lo, min(T, lo + max_width)))
        w = hi - lo + 1
        if rng.integers(2):
            d = int(rng.integers(1, w + 1))
            apps.append(Appliance.interruptible(f"a{j}", (lo, hi), d, int(rng.integers(1, 31)) / 10))
        else:
            d = int(rng.integers(1, min(w, 4) + 1))
            prof = [int(k) / 10 for k in rng.integers(1, 31, size=d)]
            apps.append(Appliance.non_interruptible(f"a{j}", (lo, hi), prof))
    return HouseholdSpec(hid, tuple(apps))


def simple_cost(T: int, c2: float = 1e-3, c1: float = 0.05, y_max: float = 1e3) -> AggregatorCostModel:
    return AggregatorCostModel((c2,) * T, (c1,) * T, (y_max,) * T)


def tiny_scenario(households, T: int, cost: AggregatorCostModel | None = None, name: str = "tiny") -> Scenario:
    return Scenario(TimeHorizon(T), tuple(households), cost or simple_cost(T), name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
