"""Scenarios, algorithm parameters and the seeded scenario generator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .appliances import Appliance, HouseholdSpec, TimeHorizon
from .subproblem import AggregatorCostModel


@dataclass(frozen=True)
class Scenario:
    horizon: TimeHorizon
    households: tuple[HouseholdSpec, ...]
    cost: AggregatorCostModel
    name: str = ""
    seed: int | None = None

    def __post_init__(self):
        hs = tuple(self.households)
        object.__setattr__(self, "households", hs)
        if not hs:
            raise ValueError("a scenario needs at least one household")
        ids = [h.id for h in hs]
        if len(set(ids)) != len(ids):
            raise ValueError("household ids must be unique")
        for h in hs:
            h.check_horizon(self.horizon)
        if self.cost.num_slots != self.horizon.num_slots:
            raise ValueError(
                f"cost model has {self.cost.num_slots} slots, horizon has {self.horizon.num_slots}"
            )

    @property
    def num_households(self) -> int:
        return len(self.households)

    def households_by_id(self) -> tuple[HouseholdSpec, ...]:
        """Households in ascending id order, the fixed reduction order."""
        return tuple(sorted(self.households, key=lambda h: h.id))


@dataclass(frozen=True)
class AlgoParams:
    """Run parameters. ``alpha*_coeff`` multiply ``||A_c||^2 D_X``.

    ``prox_mode`` selects ``min`` or ``max`` of ``0.5 ||x_i||^2`` for D_X.
    ``node_limit`` caps each household search (``None``: search to optimality).
    """

    lambda1: tuple[float, ...] | None = None
    kappa1: float = 10.0
    kappa_maxiter: float = 1e-4
    alpha1_coeff: float = 3e-4
    alpha_maxiter_coeff: float = 8e-8
    mu_hat_min: float = 0.001
    maxiter: int = 500
    worker_count: int = 1
    rng_seed: int = 0
    prox_mode: str = "min"
    node_limit: int | None = None

    def __post_init__(self):
        if self.lambda1 is not None:
            lam = tuple(float(v) for v in self.lambda1)
            if not all(math.isfinite(v) for v in lam):
                raise ValueError("lambda1 must be finite")
            object.__setattr__(self, "lambda1", lam)
        if not self.kappa1 > self.kappa_maxiter > 0:
            raise ValueError("need kappa1 > kappa_maxiter > 0")
        if not self.alpha1_coeff > self.alpha_maxiter_coeff > 0:
            raise ValueError("need alpha1_coeff > alpha_maxiter_coeff > 0")
        if not 1e-4 <= self.mu_hat_min <= 5e-3:
            raise ValueError(f"mu_hat_min must lie in [0.0001, 0.005], got {self.mu_hat_min}")
        if int(self.maxiter) != self.maxiter or self.maxiter < 1:
            raise ValueError("maxiter must be a positive integer")
        if int(self.worker_count) != self.worker_count or self.worker_count < 1:
            raise ValueError("worker_count must be a positive integer")
        if self.prox_mode not in ("min", "max"):
            raise ValueError(f"prox_mode must be 'min' or 'max', got {self.prox_mode!r}")
        if self.node_limit is not None and (int(self.node_limit) != self.node_limit or self.node_limit < 0):
            raise ValueError("node_limit must be a nonnegative integer or None")

    def initial_multipliers(self, num_slots: int) -> np.ndarray:
        if self.lambda1 is None:
            return np.zeros(num_slots)
        if len(self.lambda1) != num_slots:
            raise ValueError(f"lambda1 has {len(self.lambda1)} entries, horizon has {num_slots} slots")
        return np.array(self.lambda1)


@dataclass(frozen=True)
class GeneratorRanges:
    """Integer-grid ranges for :func:`generate_scenario`.

    Powers are ``k / 10`` kWh, ``c2 = k / 1e5`` and ``c1 = k / 1e3``, with
    each ``k`` drawn uniformly from the inclusive integer range.
    """

    ni_duration: tuple[int, int] = (1, 4)
    int_duration: tuple[int, int] = (2, 8)
    power_tenths: tuple[int, int] = (2, 30)
    window_slack: int = 2
    c2_units: tuple[int, int] = (50, 200)
    c1_units: tuple[int, int] = (20, 80)
    y_max_factor_pct: int = 150

    def check(self, num_slots: int) -> None:
        for name in ("ni_duration", "int_duration", "power_tenths", "c2_units", "c1_units"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"inconsistent range {name}={lo, hi}")
        if self.ni_duration[0] < 1 or self.int_duration[0] < 1 or self.power_tenths[0] < 1:
            raise ValueError("durations and powers must be positive")
        if self.c2_units[0] < 0 or self.c1_units[0] < 0 or self.window_slack < 0:
            raise ValueError("cost coefficients and slack must be nonnegative")
        if self.y_max_factor_pct <= 0:
            raise ValueError("y_max factor must be positive")
        for name in ("ni_duration", "int_duration"):
            if getattr(self, name)[0] + self.window_slack > num_slots:
                raise ValueError(
                    f"inconsistent ranges: minimum {name} plus slack {self.window_slack} "
                    f"exceeds {num_slots} slots"
                )


def _draw(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _draw_window(rng: np.random.Generator, num_slots: int, min_len: int) -> tuple[int, int]:
    """Uniform over all windows ``[lo, hi]`` of length at least ``min_len``."""
    m = num_slots - min_len + 1
    r = int(rng.integers(0, m * (m + 1) // 2))
    for lo in range(m):
        n_hi = m - lo
        if r < n_hi:
            return lo, lo + min_len - 1 + r
        r -= n_hi
    raise AssertionError("unreachable")


def generate_scenario(seed: int, num_households: int, num_slots: int, appliances_per_household: int,
                      ranges: GeneratorRanges = GeneratorRanges(), name: str | None = None) -> Scenario:
    """Deterministic random scenario.

    Draws use a PCG64 generator and integer sampling only, so the output is
    identical across platforms.
    """
    if num_households < 1 or num_slots < 1 or appliances_per_household < 1:
        raise ValueError("households, slots and appliances must all be >= 1")
    ranges.check(num_slots)
    rng = np.random.Generator(np.random.PCG64(seed))
    slack = ranges.window_slack
    households = []
    peak_tenths = 0
    for i in range(num_households):
        apps = []
        for j in range(appliances_per_household):
            interruptible = _draw(rng, 0, 1) == 1
            if interruptible:
                d = _draw(rng, ranges.int_duration[0], min(ranges.int_duration[1], num_slots - slack))
                lo, hi = _draw_window(rng, num_slots, d + slack)
                k = _draw(rng, *ranges.power_tenths)
                peak_tenths += k
                apps.append(Appliance.interruptible(f"a{j}", (lo, hi), d, k / 10))
            else:
                d = _draw(rng, ranges.ni_duration[0], min(ranges.ni_duration[1], num_slots - slack))
                lo, hi = _draw_window(rng, num_slots, d + slack)
                ks = [_draw(rng, *ranges.power_tenths) for _ in range(d)]
                peak_tenths += max(ks)
                apps.append(Appliance.non_interruptible(f"a{j}", (lo, hi), [k / 10 for k in ks]))
        households.append(HouseholdSpec(f"h{i:04d}", tuple(apps)))
    c2 = tuple(_draw(rng, *ranges.c2_units) / 1e5 for _ in range(num_slots))
    c1 = tuple(_draw(rng, *ranges.c1_units) / 1e3 for _ in range(num_slots))
    y_max = peak_tenths * ranges.y_max_factor_pct / 1000
    cost = AggregatorCostModel(c2, c1, (y_max,) * num_slots)
    label = name if name is not None else f"seed{seed}-I{num_households}-T{num_slots}-A{appliances_per_household}"
    return Scenario(TimeHorizon(num_slots), tuple(households), cost, label, seed)
