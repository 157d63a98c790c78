"""Round-based aggregator/household protocol driving the fast gradient method.

Each round the aggregator broadcasts the extrapolated multipliers and the
floored smoothing parameter, every household answers with its best response,
and the aggregator turns the replies into a gradient step and a recovered
primal cost. Households are pluggable endpoints; :class:`LocalHousehold`
solves in-process.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from . import dual
from .appliances import ApplianceChoice, HouseholdSpec, TimeHorizon
from .errors import NonFiniteDual
from .scenario import AlgoParams, Scenario
from .subproblem import AggregatorCostModel, max_half_norm_sq, solve_aggregator, solve_household_exact


@dataclass(frozen=True)
class BroadcastMsg:
    k: int
    lambda_hat: np.ndarray
    mu_hat: float


@dataclass(frozen=True)
class HouseholdReply:
    household_id: str
    demand: np.ndarray
    objective: float
    choices: tuple[ApplianceChoice, ...] = ()
    proven_optimal: bool = True


class HouseholdAgent(Protocol):
    """Anything that can take part in the protocol as one household."""

    id: str

    def prox_constant(self) -> float:
        """This household's contribution to ``D_X``."""

    def respond(self, msg: BroadcastMsg) -> HouseholdReply:
        """Best response to a broadcast."""


class LocalHousehold:
    """In-process household agent backed by the exact subproblem solver."""

    def __init__(self, spec: HouseholdSpec, horizon: TimeHorizon, prox_mode: str = "min",
                 node_limit: int | None = None):
        if prox_mode not in ("min", "max"):
            raise ValueError(f"prox mode must be 'min' or 'max', got {prox_mode!r}")
        self.spec = spec
        self.horizon = horizon
        self.prox_mode = prox_mode
        self.node_limit = node_limit

    @property
    def id(self) -> str:
        return self.spec.id

    def prox_constant(self) -> float:
        if self.prox_mode == "max":
            return max_half_norm_sq(self.spec, self.horizon)
        # at zero prices with unit smoothing the objective is exactly 0.5 ||x||^2
        zero = np.zeros(self.horizon.num_slots)
        return solve_household_exact(self.spec, zero, 1.0, self.horizon, self.node_limit).objective

    def respond(self, msg: BroadcastMsg) -> HouseholdReply:
        sol = solve_household_exact(self.spec, msg.lambda_hat, msg.mu_hat, self.horizon, self.node_limit)
        return HouseholdReply(self.spec.id, sol.demand, sol.objective, sol.choices, sol.proven_optimal)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    dual: float
    primal: float  # inf when the aggregate breaks a supply bound
    grad_norm: float
    mu: float
    mu_hat: float
    kappa: float
    lam_hat: tuple[float, ...] = field(repr=False)
    limited: int = 0  # household replies not proven optimal


@dataclass(frozen=True)
class RunTrace:
    """Per-iteration history plus the best recovered primal bundle.

    ``best_k`` is the smallest iteration attaining the minimal recovered
    primal; the bundle holds that iteration's ``lam_hat``, ``mu_hat`` and
    every household demand.
    """

    records: tuple[IterationRecord, ...]
    best_k: int
    best_lam_hat: tuple[float, ...]
    best_mu_hat: float
    best_demands: Mapping[str, tuple[float, ...]] = field(repr=False)
    D_X: float = 0.0
    scenario_name: str = ""
    params: AlgoParams = AlgoParams()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "best_demands", {k: tuple(v) for k, v in sorted(self.best_demands.items())})
        if not self.records:
            raise ValueError("a trace needs at least one record")
        if self.best_k != best_index(self.records):
            raise ValueError(f"best_k={self.best_k} disagrees with the recorded primal column")

    @property
    def best_primal(self) -> float:
        return self.records[self.best_k - 1].primal

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def best_index(records: Sequence[IterationRecord]) -> int:
    """Smallest ``k`` whose recorded primal is minimal (first record if none is finite)."""
    best = records[0]
    for r in records[1:]:
        if r.primal < best.primal:
            best = r
    return best.k


def recovered_primal(household_demands: Mapping[str, np.ndarray] | Sequence[np.ndarray],
                     cost: AggregatorCostModel) -> float:
    """Cost of supplying the aggregate demand exactly; ``inf`` above a supply bound."""
    if isinstance(household_demands, Mapping):
        demands = [household_demands[h] for h in sorted(household_demands)]
    else:
        demands = list(household_demands)
    y = np.zeros(cost.num_slots)
    for x in demands:
        x = np.asarray(x, dtype=float)
        if x.shape != y.shape:
            raise ValueError(f"length mismatch: demand {x.shape} vs {cost.num_slots} slots")
        y = y + x
    if not cost.within_supply(y):
        return math.inf
    return cost.total_cost(y)


def _agents_for(scenario: Scenario, params: AlgoParams,
                agents: Sequence[HouseholdAgent] | None) -> list[HouseholdAgent]:
    if agents is None:
        return [LocalHousehold(h, scenario.horizon, params.prox_mode, params.node_limit)
                for h in scenario.households_by_id()]
    agents = sorted(agents, key=lambda a: a.id)
    ids = [a.id for a in agents]
    if ids != [h.id for h in scenario.households_by_id()]:
        raise ValueError("agents must cover exactly the scenario's households")
    return agents


def _check_reply(reply: HouseholdReply, agent_id: str, T: int) -> None:
    if reply.household_id != agent_id:
        raise ValueError(f"agent {agent_id!r} replied as {reply.household_id!r}")
    d = np.asarray(reply.demand)
    if d.shape != (T,) or not np.all(np.isfinite(d)):
        raise ValueError(f"household {agent_id!r} returned a malformed demand")


def run(scenario: Scenario, params: AlgoParams = AlgoParams(),
        agents: Sequence[HouseholdAgent] | None = None,
        progress: Callable[[IterationRecord], None] | None = None) -> RunTrace:
    """Run the distributed algorithm for ``params.maxiter`` rounds.

    Household replies may be computed concurrently, but all reductions run
    in ascending household-id order, so the trace does not depend on
    ``params.worker_count``.
    """
    T = scenario.horizon.num_slots
    I = scenario.num_households
    cost = scenario.cost
    agents = _agents_for(scenario, params, agents)
    lam1 = params.initial_multipliers(T)

    with ThreadPoolExecutor(max_workers=params.worker_count) as pool:
        def gather(fn, items):
            if params.worker_count == 1:
                return [fn(a) for a in items]
            return list(pool.map(fn, items))

        D_X = math.fsum(gather(lambda a: float(a.prox_constant()), agents))
        if not D_X > 0:
            raise ValueError("D_X must be positive; every household has an all-zero schedule")
        schedule = dual.SmoothingSchedule.initial(
            D_X, I, params.maxiter,
            kappa1=params.kappa1, kappa_end=params.kappa_maxiter,
            alpha1_coeff=params.alpha1_coeff, alpha_end_coeff=params.alpha_maxiter_coeff,
            mu_hat_min=params.mu_hat_min,
        )
        state = dual.EngineState(dual.Multipliers.start(lam1), schedule)
        records: list[IterationRecord] = []
        best_primal = math.inf
        best: tuple | None = None

        for k in range(1, params.maxiter + 1):
            s = state.schedule
            lam_hat = state.multipliers.lam_hat
            x0, d0 = solve_aggregator(cost, lam_hat)
            msg = BroadcastMsg(k, lam_hat, s.mu_hat)
            replies = gather(lambda a: a.respond(msg), agents)
            for a, r in zip(agents, replies):
                _check_reply(r, a.id, T)
            demands = [np.asarray(r.demand, dtype=float) for r in replies]
            grad = dual.gradient(demands, x0, lam_hat, s.kappa)
            value = dual.smoothed_dual_value(d0, [r.objective for r in replies], lam_hat, s.kappa)
            if not math.isfinite(value):
                raise NonFiniteDual(f"dual value {value} at iteration {k}")
            primal = recovered_primal(demands, cost)
            rec = IterationRecord(
                k, value, primal, float(np.linalg.norm(grad)), s.mu, s.mu_hat, s.kappa,
                tuple(float(v) for v in lam_hat), sum(not r.proven_optimal for r in replies),
            )
            records.append(rec)
            if progress is not None:
                progress(rec)
            if best is None or primal < best_primal:
                best_primal = primal
                best = (k, rec.lam_hat, s.mu_hat, {a.id: tuple(d.tolist()) for a, d in zip(agents, demands)})
            if k < params.maxiter:
                state = dual.step(state, grad, I)
                state = dual.EngineState(state.multipliers, dual.advance_schedule(state.schedule), state.k)

    return RunTrace(tuple(records), best[0], best[1], best[2], best[3], D_X, scenario.name, params)
