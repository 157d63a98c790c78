"""Centralized reference solutions for gap measurement and duality checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _central
from .appliances import Appliance, ApplianceChoice, ApplianceKind, choice_demand
from .errors import ChoiceSpaceTooLarge, Infeasible
from .scenario import Scenario
from .subproblem import pack_household, solve_aggregator, solve_household_exact

ORACLE_CAP = 10**7


@dataclass(frozen=True)
class OracleResult:
    """Optimal total cost ``P*`` and one joint choice attaining it."""

    optimal_cost: float
    choices: dict[str, tuple[ApplianceChoice, ...]] = field(compare=False)
    aggregate: np.ndarray = field(compare=False, repr=False)
    evaluations: int = 0


def _nth_choice(a: Appliance, rank: int) -> ApplianceChoice:
    lo, hi = a.window
    if a.kind is ApplianceKind.NON_INTERRUPTIBLE:
        return ApplianceChoice(a.id, start=lo + rank)
    # unrank a combination in lexicographic order
    w, d = a.window_length, a.duration
    slots = []
    start = 0
    for i in range(d):
        for v in range(start, w):
            block = math.comb(w - v - 1, d - i - 1)
            if rank < block:
                slots.append(lo + v)
                start = v + 1
                break
            rank -= block
    return ApplianceChoice(a.id, slots=tuple(slots))


def _flatten(scenario: Scenario):
    """All appliances as flat arrays, largest energy first (ties in household-id order).

    Returns the ``(household id, appliance)`` pairs in the same order.
    """
    hs = scenario.households_by_id()
    T = scenario.horizon.num_slots
    parts = [pack_household(h, scenario.horizon) for h in hs]
    kind = np.concatenate([p.kind for p in parts])
    lo = np.concatenate([p.lo for p in parts])
    hi = np.concatenate([p.hi for p in parts])
    dur = np.concatenate([p.dur for p in parts])
    pw = np.concatenate([p.pw for p in parts])
    energy = np.concatenate([p.energy for p in parts])
    prof_list = []
    poff = []
    base = 0
    for p in parts:
        poff.append(p.poff + base)
        prof_list.append(p.prof[:-1])
        base += len(p.prof) - 1
    prof = np.concatenate(prof_list + [np.zeros(1)])
    poff = np.concatenate(poff)
    pairs = [(h.id, a) for h in hs for a in h.appliances]
    perm = np.argsort(-energy, kind="stable")
    kind, lo, hi, dur, pw, poff, energy = (v[perm] for v in (kind, lo, hi, dur, pw, poff, energy))
    apps = [pairs[i] for i in perm]
    widths = np.where(kind == 1, hi - lo + 1, 1)
    koff = np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)
    env = np.zeros((len(apps), T))
    for b, (_, a) in enumerate(apps):
        i, j = lo[b], hi[b]
        if a.kind is ApplianceKind.INTERRUPTIBLE:
            env[b, i : j + 1] = a.power
        else:
            for s in range(i, j - a.duration + 2):
                env[b, s : s + a.duration] = np.maximum(env[b, s : s + a.duration], a.profile)
    return hs, apps, (kind, lo, hi, dur, pw, poff, prof, koff, energy, np.ascontiguousarray(env))


def _result(scenario: Scenario, hs, apps, ranks, cost: float, evaluations: int) -> OracleResult:
    picked = {(hid, a.id): _nth_choice(a, int(r)) for (hid, a), r in zip(apps, ranks)}
    choices = {h.id: tuple(picked[h.id, a.id] for a in h.appliances) for h in hs}
    agg = np.zeros(scenario.horizon.num_slots)
    for h in hs:
        for a, c in zip(h.appliances, choices[h.id]):
            agg += choice_demand(a, c, scenario.horizon)
    return OracleResult(float(cost), choices, agg, int(evaluations))


def solve_central(scenario: Scenario, cap: int = ORACLE_CAP) -> OracleResult:
    """Exact minimum of ``sum_t C_t(sum_i x_i^t)`` over all joint household choices.

    Raises :class:`ChoiceSpaceTooLarge` once ``cap`` node evaluations are
    spent and :class:`Infeasible` when every joint choice breaks a supply cap.
    """
    hs, apps, arrays = _flatten(scenario)
    c = scenario.cost
    status, best, ranks, evals = _central.solve_central(
        *arrays, np.array(c.c2), np.array(c.c1), np.array(c.y_max), int(cap)
    )
    if status == 1:
        raise ChoiceSpaceTooLarge(f"central search exceeded {cap} evaluations")
    if status == 2:
        raise Infeasible("every joint choice exceeds the supply bounds")
    return _result(scenario, hs, apps, ranks, best, evals)


def solve_central_exhaustive(scenario: Scenario, cap: int = ORACLE_CAP) -> OracleResult:
    """Plain enumeration of every joint choice; for small instances only."""
    hs = scenario.households_by_id()
    pairs = [(h.id, a) for h in hs for a in h.appliances]
    apps = [a for _, a in pairs]
    total = math.prod(a.num_choices() for a in apps)
    if total > cap:
        raise ChoiceSpaceTooLarge(f"{total} joint choices exceed the cap {cap}")
    T = scenario.horizon.num_slots
    mats = [np.array([choice_demand(a, ch, scenario.horizon) for ch in a.choices()]) for a in apps]
    c2 = np.asarray(scenario.cost.c2)
    c1 = np.asarray(scenario.cost.c1)
    y_max = np.asarray(scenario.cost.y_max)
    last = mats[-1]
    best = math.inf
    best_ranks = None
    for combo in itertools.product(*(range(len(m)) for m in mats[:-1])):
        base = np.zeros(T)
        for m, i in zip(mats, combo):
            base = base + m[i]
        ys = base + last
        costs = (c2 * ys * ys + c1 * ys).sum(axis=1)
        costs[np.any(ys > y_max, axis=1)] = math.inf
        i = int(np.argmin(costs))
        if costs[i] < best:
            best = float(costs[i])
            best_ranks = combo + (i,)
    if best_ranks is None:
        raise Infeasible("every joint choice exceeds the supply bounds")
    return _result(scenario, hs, pairs, best_ranks, best, total)


def unsmoothed_dual(scenario: Scenario, lam) -> float:
    """``D(lam) = D_0(lam) + sum_i min_{x_i} lam . x_i``, a lower bound on ``P*``."""
    lam = np.asarray(lam, dtype=float)
    _, d0 = solve_aggregator(scenario.cost, lam)
    total = d0
    for h in scenario.households_by_id():
        total += solve_household_exact(h, lam, 0.0, scenario.horizon).objective
    return float(total)
