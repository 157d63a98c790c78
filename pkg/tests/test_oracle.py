import numpy as np
import pytest

from drsmooth import persist
from drsmooth.appliances import Appliance, HouseholdSpec, household_demand
from drsmooth.errors import ChoiceSpaceTooLarge, Infeasible
from drsmooth.oracle import solve_central, solve_central_exhaustive, unsmoothed_dual
from drsmooth.scenario import generate_scenario
from drsmooth.subproblem import AggregatorCostModel

from conftest import FIXTURES, SMALL, random_household, simple_cost, tiny_scenario

# Optimal costs of the desk scenarios generate_scenario(seed, 8, 12, 3), confirmed
# independently with a mixed-integer quadratic model.
DESK_P_STAR = {
    1: 9.9109106,
    2: 9.800782,
    3: 8.9691671,
    4: 10.1406347,
    5: 7.8397422,
}


def _check_result(sc, res):
    total = np.zeros(sc.horizon.num_slots)
    for h in sc.households:
        total += household_demand(h, res.choices[h.id], sc.horizon)
    np.testing.assert_allclose(total, res.aggregate)
    assert sc.cost.within_supply(total)
    assert sc.cost.total_cost(total) == pytest.approx(res.optimal_cost, rel=1e-9)


def test_single_fixed_appliance():
    spec = HouseholdSpec("h", (Appliance.non_interruptible("a", (0, 1), [1.0, 3.0]),))
    cost = AggregatorCostModel((0.5, 0.25), (0.1, 0.2), (9.0, 9.0))
    sc = tiny_scenario([spec], 2, cost)
    assert solve_central(sc).optimal_cost == pytest.approx(0.5 + 0.1 + 0.25 * 9 + 0.6)


def test_two_households_spread_out():
    hs = [HouseholdSpec(f"h{i}", (Appliance.interruptible("a", (0, 1), 1, 1.0),)) for i in range(2)]
    sc = tiny_scenario(hs, 2, AggregatorCostModel((1.0, 1.0), (0.0, 0.0), (10.0, 10.0)))
    res = solve_central(sc)
    assert res.optimal_cost == 2
    np.testing.assert_array_equal(res.aggregate, [1.0, 1.0])


@pytest.mark.parametrize("seed", range(60))
def test_matches_exhaustive(seed):
    rng = np.random.default_rng(1000 + seed)
    T = 5 + seed % 3
    hs = [random_household(rng, f"h{i}", T, 1 + (seed + i) % 2, max_width=4) for i in range(2 + seed % 3)]
    y_max = 6.0 if seed % 4 == 0 else 1e3  # some instances have binding supply caps
    sc = tiny_scenario(hs, T, simple_cost(T, c2=1e-3 * (1 + seed % 5), y_max=y_max))
    try:
        ref = solve_central_exhaustive(sc, cap=3 * 10**5)
    except Infeasible:
        with pytest.raises(Infeasible):
            solve_central(sc)
        return
    res = solve_central(sc)
    assert res.optimal_cost == pytest.approx(ref.optimal_cost, rel=1e-9)
    _check_result(sc, res)


def test_golden_fixture_optimum():
    sc = persist.load_scenario(FIXTURES / "scenario_seed1_I2_T4_A1.json")
    res = solve_central(sc)
    assert res.optimal_cost == pytest.approx(solve_central_exhaustive(sc).optimal_cost, rel=1e-12)
    _check_result(sc, res)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [3, 5])
def test_desk_golden_values(seed):
    sc = generate_scenario(seed, 8, 12, 3)
    res = solve_central(sc)
    assert res.optimal_cost == pytest.approx(DESK_P_STAR[seed], rel=1e-9)
    _check_result(sc, res)


def test_infeasible():
    hs = [HouseholdSpec(f"h{i}", (Appliance.non_interruptible("a", (0, 0), [2.0]),)) for i in range(2)]
    sc = tiny_scenario(hs, 1, AggregatorCostModel((1.0,), (0.0,), (3.0,)))
    with pytest.raises(Infeasible):
        solve_central(sc)
    with pytest.raises(Infeasible):
        solve_central_exhaustive(sc)


def test_caps_are_errors():
    sc = generate_scenario(3, 8, 12, 3)
    with pytest.raises(ChoiceSpaceTooLarge):
        solve_central(sc, cap=50)
    with pytest.raises(ChoiceSpaceTooLarge):
        solve_central_exhaustive(sc)


def test_unsmoothed_dual_at_zero():
    sc = generate_scenario(2, 3, 6, 2, SMALL)
    assert unsmoothed_dual(sc, np.zeros(6)) == 0


def test_weak_duality_and_concavity_samples():
    rng = np.random.default_rng(77)
    sc = generate_scenario(8, 3, 6, 2, SMALL)
    p_star = solve_central(sc).optimal_cost
    c1 = np.array(sc.cost.c1)
    for _ in range(50):
        l1 = c1 + rng.uniform(-0.05, 0.1, 6)
        l2 = c1 + rng.uniform(-0.05, 0.1, 6)
        d1, d2 = unsmoothed_dual(sc, l1), unsmoothed_dual(sc, l2)
        assert max(d1, d2) <= p_star + 1e-9 * abs(p_star)
        mid = unsmoothed_dual(sc, 0.5 * (l1 + l2))
        assert mid >= 0.5 * (d1 + d2) - 1e-12
