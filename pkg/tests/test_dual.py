import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drsmooth.appliances import Appliance, HouseholdSpec
from drsmooth.coordinator import run
from drsmooth.dual import (
    EngineState,
    Multipliers,
    SmoothingSchedule,
    advance_schedule,
    coupling_norm_sq,
    decay_factor,
    gradient,
    lipschitz_constant,
    momentum_beta,
    smoothed_dual_value,
    step,
)
from drsmooth.scenario import AlgoParams
from drsmooth.subproblem import AggregatorCostModel, solve_aggregator, solve_household_exact

from conftest import random_household, tiny_scenario


def _schedule(mu=1.0, kappa=1.0, D_X=1.0, mu_hat_min=0.0, maxiter=10):
    return SmoothingSchedule(mu=mu, mu_hat=max(mu, mu_hat_min), kappa=kappa, alpha=mu * D_X,
                             mu_hat_min=mu_hat_min, alpha_decay=0.5, kappa_decay=0.5, D_X=D_X, maxiter=maxiter)


def test_coupling_norm_examples():
    assert coupling_norm_sq(1) == 2
    assert coupling_norm_sq(2) == 3
    assert coupling_norm_sq(640) == 641
    with pytest.raises(ValueError):
        coupling_norm_sq(0)


def test_gradient_examples():
    np.testing.assert_array_equal(gradient([[5.0, 3.0]], [5.0, 3.0], [0.0, 0.0], 0.0), [0, 0])
    np.testing.assert_allclose(gradient([[4.0, 2.0]], [3.0, 1.0], [1.0, 1.0], 0.5), [0.5, 0.5])
    with pytest.raises(ValueError):
        gradient([[1.0, 2.0, 3.0]], [1.0, 2.0], [0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        gradient([[1.0, 2.0]], [1.0, 2.0], [0.0], 0.0)


def test_gradient_mapping_reduces_in_id_order():
    d = {"b": np.array([0.1, 0.2]), "a": np.array([1e16, 0.0]), "c": np.array([-1e16, 0.3])}
    ordered = [d["a"], d["b"], d["c"]]
    np.testing.assert_array_equal(gradient(d, [0, 0], [0, 0], 0.0), gradient(ordered, [0, 0], [0, 0], 0.0))


def test_lipschitz_examples():
    assert lipschitz_constant(1.0, 0.0, 1) == 2
    assert lipschitz_constant(0.5, 10.0, 2) == 16
    with pytest.raises(ValueError):
        lipschitz_constant(0.0, 1.0, 1)


def test_momentum_examples():
    assert momentum_beta(3.0, 3.0) == 0
    assert momentum_beta(4.0, 1.0) == pytest.approx(1 / 3)
    assert momentum_beta(1.0, 1e-8) > 0.999
    with pytest.raises(ValueError):
        momentum_beta(1.0, 2.0)
    with pytest.raises(ValueError):
        momentum_beta(1.0, 0.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_momentum_range_and_monotone(L, f1, f2):
    k1, k2 = sorted((L * f1, L * f2))
    b1, b2 = momentum_beta(L, k1), momentum_beta(L, k2)
    assert 0 <= b2 <= b1 < 1


def test_step_examples():
    # I=1, mu=2/3, kappa=1 gives L=4 and beta=1/3
    s = _schedule(mu=2 / 3, kappa=1.0)
    st0 = EngineState(Multipliers([0.0], [0.0]), s)
    st1 = step(st0, [2.0], 1)
    assert st1.k == 2
    np.testing.assert_allclose(st1.multipliers.lam, [0.5])
    np.testing.assert_allclose(st1.multipliers.lam_hat, [0.5 + 0.5 / 3])


def test_step_fixed_point():
    st0 = EngineState(Multipliers([1.0, -2.0], [1.0, -2.0]), _schedule(), k=3)
    st1 = step(st0, [0.0, 0.0], 4)
    assert st1.multipliers == st0.multipliers and st1.k == 4


def test_step_allows_negative_multipliers():
    st0 = EngineState(Multipliers.start([0.0]), _schedule())
    assert step(st0, [-5.0], 1).multipliers.lam[0] < 0


def test_multipliers_validation():
    with pytest.raises(ValueError):
        Multipliers([0.0, 1.0], [0.0])
    with pytest.raises(ValueError):
        Multipliers([np.inf], [0.0])
    m = Multipliers.start([1.0])
    with pytest.raises(ValueError):
        m.lam[0] = 2.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        SmoothingSchedule(1.0, 0.5, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0, 10)
    with pytest.raises(ValueError):
        SmoothingSchedule(1.0, 1.0, 1.0, 1.0, 0.5, 1.5, 0.5, 1.0, 10)


def test_decay_factor_example():
    f = decay_factor(10.0, 1e-4, 1000)
    assert f == pytest.approx(0.988553, abs=1e-6)
    k = 10.0
    for _ in range(1000):
        k *= f
    assert k == pytest.approx(1e-4, rel=1e-9)


def test_initial_schedule_values():
    s = SmoothingSchedule.initial(D_X=4.0, num_households=3, maxiter=500)
    assert s.alpha == pytest.approx(3e-4 * 4 * 4.0)
    assert s.mu == pytest.approx(s.alpha / 4.0)
    assert s.kappa == 10.0
    assert s.mu_hat == max(s.mu, 0.001)


def test_advance_keeps_mu_alpha_ratio_and_floor():
    s = SmoothingSchedule.initial(D_X=100.0, num_households=1, maxiter=100, mu_hat_min=0.004)
    floored = False
    for _ in range(100):
        s = advance_schedule(s)
        assert s.mu == s.alpha / s.D_X
        assert s.mu_hat == max(s.mu, 0.004)
        if s.mu < 0.004:
            floored = True
            assert s.mu_hat == 0.004
    assert floored


def test_smoothed_dual_value():
    assert smoothed_dual_value(1.0, [2.0, 3.0], [1.0, 2.0], 0.5) == pytest.approx(6 - 0.25 * 5)


def test_hand_stepped_single_slot_run():
    # one household, one slot, one fixed load of 2 kWh
    spec = HouseholdSpec("h", (Appliance.non_interruptible("a", (0, 0), [2.0]),))
    cost = AggregatorCostModel((0.5,), (0.1,), (10.0,))
    sc = tiny_scenario([spec], 1, cost)
    params = AlgoParams(maxiter=3)
    tr = run(sc, params)
    D_X = 2.0
    alpha = 3e-4 * 2 * D_X
    fa = math.exp(math.log(8e-8 / 3e-4) / 3)
    fk = math.exp(math.log(1e-4 / 10) / 3)
    kappa = 10.0
    lam = lam_hat = 0.0
    for k in range(1, 4):
        mu = alpha / D_X
        mu_hat = max(mu, 0.001)
        x0 = min(max((lam_hat - 0.1) / 1.0, 0.0), 10.0)
        g = 2.0 - x0 - kappa * lam_hat
        d = (0.5 * x0 * x0 + 0.1 * x0 - lam_hat * x0) + (2 * lam_hat + mu_hat / 2 * 4) - kappa / 2 * lam_hat**2
        r = tr.records[k - 1]
        assert r.lam_hat[0] == pytest.approx(lam_hat, rel=1e-12, abs=1e-15)
        assert r.dual == pytest.approx(d, rel=1e-12)
        assert r.mu == pytest.approx(mu) and r.mu_hat == pytest.approx(mu_hat) and r.kappa == pytest.approx(kappa)
        assert r.primal == pytest.approx(0.5 * 4 + 0.2)
        L = 2 / mu + kappa
        beta = (math.sqrt(L) - math.sqrt(kappa)) / (math.sqrt(L) + math.sqrt(kappa))
        new = lam_hat + g / L
        lam_hat = new + beta * (new - lam)
        lam = new
        alpha *= fa
        kappa *= fk


def _smoothed_dual_and_grad(sc, lam, mu, kappa):
    x0, d0 = solve_aggregator(sc.cost, lam)
    sols = [solve_household_exact(h, lam, mu, sc.horizon) for h in sc.households_by_id()]
    value = smoothed_dual_value(d0, [s.objective for s in sols], lam, kappa)
    return value, gradient([s.demand for s in sols], x0, lam, kappa)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strong_concavity_marker(seed):
    rng = np.random.default_rng(seed)
    T = 5
    sc = tiny_scenario([random_household(rng, f"h{i}", T, 2) for i in range(2)], T)
    mu, kappa = 0.05, 0.5
    l1, l2 = rng.uniform(0.0, 0.2, T), rng.uniform(0.0, 0.2, T)
    d1, g1 = _smoothed_dual_and_grad(sc, l1, mu, kappa)
    d2, _ = _smoothed_dual_and_grad(sc, l2, mu, kappa)
    diff = l2 - l1
    assert d2 <= d1 + g1 @ diff - 0.5 * kappa * diff @ diff + 1e-9 * max(1.0, abs(d1))


def test_engine_state_counter():
    with pytest.raises(ValueError):
        EngineState(Multipliers.start([0.0]), _schedule(), k=0)
