"""Per-agent subproblems of the (smoothed) Lagrangian dual.

Households solve ``min_{x in X_i} lam . x + mu/2 ||x||^2`` exactly; the
aggregator solves a per-slot convex quadratic in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _bnb
from .appliances import (
    Appliance,
    ApplianceChoice,
    ApplianceKind,
    HouseholdSpec,
    TimeHorizon,
    choice_demand,
    household_demand,
)
from .errors import ChoiceSpaceTooLarge

# Leaves whose objectives lie within this relative distance of the optimum
# are ties, resolved by the lexicographically smallest choice encoding.
TIE_TOL = 1e-10

BRUTEFORCE_CAP = 10**6


def _slack(v: float) -> float:
    return v + TIE_TOL * max(1.0, abs(v))


@dataclass(frozen=True)
class AggregatorCostModel:
    """Per-slot supply cost ``C_t(y) = c2_t y^2 + c1_t y`` on ``0 <= y <= y_max_t``."""

    c2: tuple[float, ...]
    c1: tuple[float, ...]
    y_max: tuple[float, ...]

    def __post_init__(self):
        c2 = tuple(float(v) for v in self.c2)
        c1 = tuple(float(v) for v in self.c1)
        y_max = tuple(float(v) for v in self.y_max)
        if not (len(c2) == len(c1) == len(y_max)) or not c2:
            raise ValueError("cost coefficient vectors must be nonempty and of equal length")
        if any(not math.isfinite(v) or v < 0 for v in c2 + c1):
            raise ValueError("cost coefficients must be finite and nonnegative")
        if any(not (v > 0) for v in y_max):
            raise ValueError("supply bounds y_max must be positive")
        object.__setattr__(self, "c2", c2)
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "y_max", y_max)

    @property
    def num_slots(self) -> int:
        return len(self.c2)

    def slot_costs(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.asarray(self.c2) * y * y + np.asarray(self.c1) * y

    def total_cost(self, y: np.ndarray) -> float:
        return float(np.sum(self.slot_costs(y)))

    def within_supply(self, y: np.ndarray) -> bool:
        return bool(np.all(np.asarray(y) <= np.asarray(self.y_max)))


@dataclass(frozen=True)
class HouseholdSolution:
    choices: tuple[ApplianceChoice, ...]
    demand: np.ndarray = field(compare=False)
    objective: float
    nodes: int = 0
    proven_optimal: bool = True


def household_objective(demand: np.ndarray, lam: np.ndarray, mu: float) -> float:
    """``lam . x + mu/2 ||x||^2``."""
    x = np.asarray(demand, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if x.shape != lam.shape:
        raise ValueError(f"length mismatch: demand {x.shape} vs multipliers {lam.shape}")
    return float(lam @ x + 0.5 * mu * (x @ x))


class PackedHousehold(NamedTuple):
    """Flat array encoding of a household consumed by the compiled solver."""

    kind: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    dur: np.ndarray
    pw: np.ndarray
    poff: np.ndarray
    prof: np.ndarray
    koff: np.ndarray
    energy: np.ndarray
    peak: np.ndarray


@lru_cache(maxsize=4096)
def pack_household(spec: HouseholdSpec, horizon: TimeHorizon) -> PackedHousehold:
    spec.check_horizon(horizon)
    n = len(spec.appliances)
    kind = np.empty(n, np.int64)
    lo = np.empty(n, np.int64)
    hi = np.empty(n, np.int64)
    dur = np.empty(n, np.int64)
    pw = np.zeros(n)
    poff = np.zeros(n, np.int64)
    koff = np.zeros(n + 1, np.int64)
    energy = np.empty(n)
    peak = np.empty(n)
    prof: list[float] = []
    for i, a in enumerate(spec.appliances):
        lo[i] = horizon.index(a.window[0])
        hi[i] = horizon.index(a.window[1])
        dur[i] = a.duration
        energy[i] = a.energy
        peak[i] = a.peak
        if a.kind is ApplianceKind.NON_INTERRUPTIBLE:
            kind[i] = _bnb.NI
            poff[i] = len(prof)
            prof.extend(a.profile)
            koff[i + 1] = koff[i] + 1
        else:
            kind[i] = _bnb.INT
            pw[i] = a.power
            koff[i + 1] = koff[i] + a.window_length
    packed = PackedHousehold(kind, lo, hi, dur, pw, poff, np.array(prof + [0.0]), koff, energy, peak)
    for arr in packed:
        arr.flags.writeable = False
    return packed


def decode_key(spec: HouseholdSpec, packed: PackedHousehold, key: np.ndarray,
               horizon: TimeHorizon) -> tuple[ApplianceChoice, ...]:
    out = []
    for i, a in enumerate(spec.appliances):
        k0 = packed.koff[i]
        lo = a.window[0]
        if a.kind is ApplianceKind.NON_INTERRUPTIBLE:
            out.append(ApplianceChoice(a.id, start=lo + int(key[k0])))
        else:
            seg = key[k0 : k0 + a.window_length]
            out.append(ApplianceChoice(a.id, slots=tuple(lo + int(j) for j in np.flatnonzero(seg == 0))))
    return tuple(out)


def _check_lam(lam, horizon: TimeHorizon) -> np.ndarray:
    lam = np.ascontiguousarray(lam, dtype=float)
    if lam.shape != (horizon.num_slots,):
        raise ValueError(f"multipliers must have length {horizon.num_slots}, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("multipliers must be finite")
    return lam


def _separable_choice(a: Appliance, lam: np.ndarray, horizon: TimeHorizon) -> ApplianceChoice:
    lo, hi = horizon.index(a.window[0]), horizon.index(a.window[1])
    if a.kind is ApplianceKind.NON_INTERRUPTIBLE:
        prof = np.asarray(a.profile)
        costs = [float(lam[s : s + a.duration] @ prof) for s in range(lo, hi - a.duration + 2)]
        best = min(costs)
        s = next(i for i, v in enumerate(costs) if v <= _slack(best))
        return ApplianceChoice(a.id, start=a.window[0] + s)
    order = sorted(range(lo, hi + 1), key=lambda t: (lam[t], t))
    return ApplianceChoice(a.id, slots=tuple(horizon.start_slot + t for t in order[: a.duration]))


def solve_household_exact(spec: HouseholdSpec, lam, mu: float, horizon: TimeHorizon,
                          node_limit: int | None = None) -> HouseholdSolution:
    """Globally optimal joint appliance choice for one household.

    ``mu > 0`` runs the compiled branch-and-bound; ``mu == 0`` is separable
    and each appliance is minimised on its own.

    ``node_limit`` caps the number of expanded nodes. A capped search returns
    the best schedule it found with ``proven_optimal`` False; the default
    ``None`` searches to completion.
    """
    if node_limit is not None and (int(node_limit) != node_limit or node_limit < 0):
        raise ValueError(f"node_limit must be a nonnegative integer or None, got {node_limit!r}")
    lam = _check_lam(lam, horizon)
    mu = float(mu)
    if mu < 0 or not math.isfinite(mu):
        raise ValueError(f"smoothing parameter must be finite and >= 0, got {mu}")
    if mu == 0.0:
        spec.check_horizon(horizon)
        choices = tuple(_separable_choice(a, lam, horizon) for a in spec.appliances)
        demand = household_demand(spec, choices, horizon)
        return HouseholdSolution(choices, demand, household_objective(demand, lam, 0.0))
    p = pack_household(spec, horizon)
    limit = -1 if node_limit is None else int(node_limit)
    key, y, obj, nodes, proven = _bnb.solve_household(*p, lam, mu, TIE_TOL, limit)
    return HouseholdSolution(decode_key(spec, p, key, horizon), y, float(obj), int(nodes), bool(proven))


def solve_household_bruteforce(spec: HouseholdSpec, lam, mu: float, horizon: TimeHorizon,
                               cap: int = BRUTEFORCE_CAP) -> HouseholdSolution:
    """Exhaustive enumeration with the same tie rule as :func:`solve_household_exact`."""
    lam = _check_lam(lam, horizon)
    spec.check_horizon(horizon)
    total = spec.num_joint_choices()
    if total > cap:
        raise ChoiceSpaceTooLarge(f"household {spec.id!r} has {total} joint choices (cap {cap})")
    per_app = [list(a.choices()) for a in spec.appliances]
    mats = [np.array([choice_demand(a, c, horizon) for c in cs]) for a, cs in zip(spec.appliances, per_app)]
    last = mats[-1]
    objs = np.empty(total)
    pos = 0
    for combo in itertools.product(*(range(len(m)) for m in mats[:-1])):
        base = np.zeros(horizon.num_slots)
        for m, i in zip(mats, combo):
            base = base + m[i]
        ys = base + last
        objs[pos : pos + len(last)] = ys @ lam + 0.5 * mu * np.einsum("ij,ij->i", ys, ys)
        pos += len(last)
    best = float(objs.min())
    flat = int(np.flatnonzero(objs <= _slack(best))[0])
    idx = np.unravel_index(flat, [len(m) for m in mats])
    choices = tuple(cs[i] for cs, i in zip(per_app, idx))
    demand = household_demand(spec, choices, horizon)
    return HouseholdSolution(choices, demand, household_objective(demand, lam, mu))


def solve_aggregator(cost: AggregatorCostModel, lam) -> tuple[np.ndarray, float]:
    """Supply ``x0`` minimising ``sum_t C_t(x0_t) - lam_t x0_t`` and that minimum."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (cost.num_slots,):
        raise ValueError(f"multipliers must have length {cost.num_slots}")
    c2 = np.asarray(cost.c2)
    c1 = np.asarray(cost.c1)
    y_max = np.asarray(cost.y_max)
    x0 = np.zeros_like(lam)
    quad = c2 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        x0[quad] = np.clip((lam[quad] - c1[quad]) / (2.0 * c2[quad]), 0.0, y_max[quad])
    lin = ~quad
    x0[lin] = np.where(lam[lin] > c1[lin], y_max[lin], 0.0)
    value = float(np.sum(c2 * x0 * x0 + c1 * x0 - lam * x0))
    return x0, value


def max_half_norm_sq(spec: HouseholdSpec, horizon: TimeHorizon) -> float:
    """``max 0.5 ||x||^2`` over the household's feasible set (depth-first, envelope bound)."""
    spec.check_horizon(horizon)
    T = horizon.num_slots
    mats = []
    env = []
    for a in spec.appliances:
        m = np.array([choice_demand(a, c, horizon) for c in a.choices()])
        # large norms first so the incumbent improves early
        m = m[np.argsort(-np.einsum("ij,ij->i", m, m), kind="stable")]
        mats.append(m)
        env.append(m.max(axis=0))
    tail = np.zeros((len(mats) + 1, T))
    for i in range(len(mats) - 1, -1, -1):
        tail[i] = tail[i + 1] + env[i]
    best = -np.inf

    def dfs(i: int, y: np.ndarray) -> None:
        nonlocal best
        if i == len(mats):
            best = max(best, 0.5 * float(y @ y))
            return
        ub = y + tail[i]
        if 0.5 * float(ub @ ub) <= best:
            return
        for row in mats[i]:
            dfs(i + 1, y + row)

    dfs(0, np.zeros(T))
    return best


def separable_minimum(spec: HouseholdSpec, lam, horizon: TimeHorizon) -> float:
    """Unsmoothed household dual term ``min_{x in X_i} lam . x``."""
    return solve_household_exact(spec, lam, 0.0, horizon).objective

