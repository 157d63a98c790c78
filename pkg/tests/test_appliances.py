import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drsmooth.appliances import (
    Appliance,
    ApplianceChoice,
    ApplianceKind,
    HouseholdSpec,
    TimeHorizon,
    choice_demand,
    household_demand,
    prox_constant,
)
from drsmooth.errors import DuplicateChoice, InvalidChoice, MissingChoice
from drsmooth.subproblem import solve_household_bruteforce

from conftest import random_household


def test_horizon_validation():
    with pytest.raises(ValueError):
        TimeHorizon(0)
    with pytest.raises(ValueError):
        TimeHorizon(3, slot_duration=0)
    h = TimeHorizon(4, start_slot=10)
    assert h.end_slot == 13 and h.contains(13) and not h.contains(14)
    assert h.index(12) == 2


def test_appliance_validation():
    with pytest.raises(ValueError):
        Appliance.non_interruptible("a", (0, 1), [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        Appliance.non_interruptible("a", (0, 3), [1.0, -1.0])
    with pytest.raises(ValueError):
        Appliance.interruptible("a", (0, 1), 3, 1.0)
    with pytest.raises(ValueError):
        Appliance.interruptible("a", (0, 3), 2, 0.0)
    with pytest.raises(ValueError):
        Appliance.interruptible("a", (3, 1), 1, 1.0)


def test_choice_enumeration_counts_and_order():
    ni = Appliance.non_interruptible("w", (2, 6), [1.0, 2.0])
    assert ni.num_choices() == 4
    assert [c.start for c in ni.choices()] == [2, 3, 4, 5]
    it = Appliance.interruptible("ev", (0, 3), 2, 1.5)
    cs = list(it.choices())
    assert len(cs) == it.num_choices() == math.comb(4, 2)
    assert [c.encoding for c in cs] == sorted(c.encoding for c in cs)


def test_choice_demand_profiles():
    h = TimeHorizon(5)
    ni = Appliance.non_interruptible("w", (0, 4), [1.0, 2.0])
    np.testing.assert_array_equal(choice_demand(ni, ApplianceChoice("w", start=2), h), [0, 0, 1, 2, 0])
    it = Appliance.interruptible("ev", (1, 4), 2, 0.5)
    np.testing.assert_array_equal(choice_demand(it, ApplianceChoice("ev", slots=(4, 1)), h), [0, 0.5, 0, 0, 0.5])


def test_choice_demand_with_offset_horizon():
    h = TimeHorizon(3, start_slot=7)
    ni = Appliance.non_interruptible("w", (8, 9), [3.0])
    np.testing.assert_array_equal(choice_demand(ni, ApplianceChoice("w", start=9), h), [0, 0, 3])


def test_invalid_choices():
    ni = Appliance.non_interruptible("w", (0, 3), [1.0, 1.0])
    with pytest.raises(InvalidChoice):
        ni.check_choice(ApplianceChoice("w", start=3))
    with pytest.raises(InvalidChoice):
        ni.check_choice(ApplianceChoice("w", slots=(0, 1)))
    with pytest.raises(InvalidChoice):
        ni.check_choice(ApplianceChoice("other", start=0))
    it = Appliance.interruptible("ev", (1, 3), 2, 1.0)
    with pytest.raises(InvalidChoice):
        it.check_choice(ApplianceChoice("ev", slots=(0, 1)))
    with pytest.raises(InvalidChoice):
        it.check_choice(ApplianceChoice("ev", slots=(1, 1)))
    with pytest.raises(InvalidChoice):
        ApplianceChoice("ev")


def test_household_demand_errors():
    h = TimeHorizon(4)
    spec = HouseholdSpec("h", (Appliance.non_interruptible("a", (0, 3), [1.0]),
                               Appliance.interruptible("b", (0, 3), 1, 2.0)))
    a = ApplianceChoice("a", start=0)
    b = ApplianceChoice("b", slots=(3,))
    np.testing.assert_array_equal(household_demand(spec, [a, b], h), [1, 0, 0, 2])
    with pytest.raises(MissingChoice):
        household_demand(spec, [a], h)
    with pytest.raises(DuplicateChoice):
        household_demand(spec, [a, a, b], h)
    with pytest.raises(InvalidChoice):
        household_demand(spec, [a, b, ApplianceChoice("zz", start=0)], h)


def test_household_spec_validation():
    with pytest.raises(MissingChoice):
        HouseholdSpec("h", ())
    a = Appliance.non_interruptible("a", (0, 3), [1.0])
    with pytest.raises(ValueError):
        HouseholdSpec("h", (a, a))
    with pytest.raises(ValueError):
        HouseholdSpec("h", (Appliance.non_interruptible("a", (0, 9), [1.0]),)).check_horizon(TimeHorizon(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_energy_is_choice_invariant(seed):
    rng = np.random.default_rng(seed)
    spec = random_household(rng, "h", 6, 2)
    h = TimeHorizon(6)
    for a in spec.appliances:
        for c in a.choices():
            assert choice_demand(a, c, h).sum() == pytest.approx(a.energy)
            assert choice_demand(a, c, h).max() == pytest.approx(a.peak)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prox_constants_bracket_every_choice(seed):
    rng = np.random.default_rng(seed)
    h = TimeHorizon(6)
    spec = random_household(rng, "h", 6, 2)
    lo, hi = prox_constant(spec, h, "min"), prox_constant(spec, h, "max")
    assert 0 < lo <= hi + 1e-12
    # brute force over all joint choices: 0.5||x||^2 is the mu=1, lam=0 objective
    best = solve_household_bruteforce(spec, np.zeros(6), 1.0, h).objective
    assert lo == pytest.approx(best, rel=1e-12)
    norms = [0.5 * float(x @ x) for x in (
        sum(choice_demand(a, c, h) for a, c in zip(spec.appliances, combo))
        for combo in itertools.product(*(list(a.choices()) for a in spec.appliances)))]
    assert hi == pytest.approx(max(norms), rel=1e-12)


def test_prox_mode_rejected():
    spec = HouseholdSpec("h", (Appliance.non_interruptible("a", (0, 1), [1.0]),))
    with pytest.raises(ValueError):
        prox_constant(spec, TimeHorizon(2), "mean")


def test_kind_accepts_string():
    a = Appliance("a", "interruptible", (0, 2), duration=1, power=1.0)
    assert a.kind is ApplianceKind.INTERRUPTIBLE
