"""Double-smoothed dual: gradient, step length, fast-gradient updates and schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np


def _vector(v, name: str) -> np.ndarray:
    arr = np.array(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Multipliers:
    """Current multipliers ``lam`` and the extrapolated point ``lam_hat``."""

    lam: np.ndarray
    lam_hat: np.ndarray

    def __post_init__(self):
        lam = _vector(self.lam, "lam")
        lam_hat = _vector(self.lam_hat, "lam_hat")
        if lam.shape != lam_hat.shape:
            raise ValueError(f"lam and lam_hat lengths differ: {lam.size} vs {lam_hat.size}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lam_hat", lam_hat)

    @classmethod
    def start(cls, lam1) -> "Multipliers":
        return cls(lam1, lam1)

    def __eq__(self, other):
        if not isinstance(other, Multipliers):
            return NotImplemented
        return np.array_equal(self.lam, other.lam) and np.array_equal(self.lam_hat, other.lam_hat)


def decay_factor(start: float, end: float, maxiter: int) -> float:
    """Per-iteration factor taking ``start`` to ``end`` in ``maxiter`` multiplications."""
    if not (start > 0 and end > 0) or maxiter < 1:
        raise ValueError("decay endpoints must be positive and maxiter >= 1")
    return math.exp(math.log(end / start) / maxiter)


@dataclass(frozen=True)
class SmoothingSchedule:
    mu: float
    mu_hat: float
    kappa: float
    alpha: float
    mu_hat_min: float
    alpha_decay: float
    kappa_decay: float
    D_X: float
    maxiter: int

    def __post_init__(self):
        if not (self.mu > 0 and self.kappa > 0 and self.alpha > 0 and self.D_X > 0):
            raise ValueError("mu, kappa, alpha and D_X must be positive")
        if self.mu_hat_min < 0:
            raise ValueError("mu_hat_min must be nonnegative")
        for name in ("alpha_decay", "kappa_decay"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.mu_hat != max(self.mu, self.mu_hat_min):
            raise ValueError("mu_hat must equal max(mu, mu_hat_min)")
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")

    @classmethod
    def initial(cls, D_X: float, num_households: int, maxiter: int, *, kappa1: float = 10.0,
                kappa_end: float = 1e-4, alpha1_coeff: float = 3e-4, alpha_end_coeff: float = 8e-8,
                mu_hat_min: float = 0.001) -> "SmoothingSchedule":
        """Schedule at k = 1 with alpha endpoints given as multiples of ``||A_c||^2 D_X``."""
        if not kappa1 > kappa_end > 0:
            raise ValueError("need kappa1 > kappa_end > 0")
        if not alpha1_coeff > alpha_end_coeff > 0:
            raise ValueError("need alpha1_coeff > alpha_end_coeff > 0")
        scale = coupling_norm_sq(num_households) * D_X
        alpha1 = alpha1_coeff * scale
        mu = alpha1 / D_X
        return cls(
            mu=mu,
            mu_hat=max(mu, mu_hat_min),
            kappa=kappa1,
            alpha=alpha1,
            mu_hat_min=mu_hat_min,
            alpha_decay=decay_factor(alpha1, alpha_end_coeff * scale, maxiter),
            kappa_decay=decay_factor(kappa1, kappa_end, maxiter),
            D_X=D_X,
            maxiter=maxiter,
        )


@dataclass(frozen=True)
class EngineState:
    multipliers: Multipliers
    schedule: SmoothingSchedule
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("iteration counter starts at 1")


def coupling_norm_sq(num_households: int) -> float:
    """Squared spectral norm of the coupling matrix ``[I_T ... I_T, -I_T]``.

    Its rows are orthogonal with ``A A^T = (I + 1) Id``, so the norm is exact.
    """
    if int(num_households) != num_households or num_households < 1:
        raise ValueError(f"need at least one household, got {num_households!r}")
    return float(num_households + 1)


def gradient(household_demands: Mapping[str, np.ndarray] | Sequence[np.ndarray], x0, lam_hat,
             kappa: float) -> np.ndarray:
    """``sum_i x_i - x0 - kappa * lam_hat``.

    A mapping is reduced in ascending household-id order; a sequence is
    reduced in the order given.
    """
    if isinstance(household_demands, Mapping):
        demands = [household_demands[h] for h in sorted(household_demands)]
    else:
        demands = list(household_demands)
    x0 = np.asarray(x0, dtype=float)
    lam_hat = np.asarray(lam_hat, dtype=float)
    if x0.shape != lam_hat.shape or x0.ndim != 1:
        raise ValueError(f"length mismatch: x0 {x0.shape} vs multipliers {lam_hat.shape}")
    total = np.zeros_like(x0)
    for x in demands:
        x = np.asarray(x, dtype=float)
        if x.shape != x0.shape:
            raise ValueError(f"length mismatch: demand {x.shape} vs {x0.shape}")
        total = total + x
    return total - x0 - kappa * lam_hat


def lipschitz_constant(mu: float, kappa: float, num_households: int) -> float:
    if not mu > 0:
        raise ValueError("mu must be positive")
    return coupling_norm_sq(num_households) / mu + kappa


def momentum_beta(L: float, kappa: float) -> float:
    if not (kappa > 0 and L >= kappa):
        raise ValueError(f"need L >= kappa > 0, got L={L}, kappa={kappa}")
    rl, rk = math.sqrt(L), math.sqrt(kappa)
    return (rl - rk) / (rl + rk)


def step(state: EngineState, grad, num_households: int) -> EngineState:
    """One fast-gradient update at the current extrapolated point.

    The step length uses the unfloored ``mu``; no projection is applied.
    """
    s = state.schedule
    m = state.multipliers
    grad = np.asarray(grad, dtype=float)
    if grad.shape != m.lam.shape:
        raise ValueError(f"gradient length {grad.shape} does not match multipliers {m.lam.shape}")
    L = lipschitz_constant(s.mu, s.kappa, num_households)
    beta = momentum_beta(L, s.kappa)
    lam_next = m.lam_hat + grad / L
    lam_hat_next = lam_next + beta * (lam_next - m.lam)
    return EngineState(Multipliers(lam_next, lam_hat_next), s, state.k + 1)


def advance_schedule(schedule: SmoothingSchedule) -> SmoothingSchedule:
    alpha = schedule.alpha * schedule.alpha_decay
    kappa = schedule.kappa * schedule.kappa_decay
    mu = alpha / schedule.D_X
    return replace(schedule, alpha=alpha, kappa=kappa, mu=mu, mu_hat=max(mu, schedule.mu_hat_min))


def smoothed_dual_value(aggregator_value: float, household_objectives: Sequence[float], lam_hat,
                        kappa: float) -> float:
    """``D_0 + sum_i D_i - kappa/2 ||lam_hat||^2`` from already computed subproblem values."""
    lam_hat = np.asarray(lam_hat, dtype=float)
    total = float(aggregator_value)
    for v in household_objectives:
        total += float(v)
    return total - 0.5 * kappa * float(lam_hat @ lam_hat)
