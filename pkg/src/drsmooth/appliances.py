"""Household appliance model.

A household's feasible set is the Cartesian product of its appliances'
discrete decision spaces:

* a non-interruptible appliance picks one start slot and then runs its
  fixed per-slot profile contiguously;
* an interruptible appliance picks any ``duration`` slots of its window
  and draws ``power`` in each of them.

Demand profiles are plain ``numpy`` float arrays of length ``T`` holding
energy per slot, indexed relative to the horizon start.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import DuplicateChoice, InvalidChoice, MissingChoice


class ApplianceKind(str, Enum):
    NON_INTERRUPTIBLE = "non_interruptible"
    INTERRUPTIBLE = "interruptible"


@dataclass(frozen=True)
class TimeHorizon:
    """Scheduling horizon ``{start_slot, ..., start_slot + num_slots - 1}``."""

    num_slots: int
    start_slot: int = 0
    slot_duration: float = 1.0  # hours, informational only

    def __post_init__(self):
        if int(self.num_slots) != self.num_slots or self.num_slots < 1:
            raise ValueError(f"num_slots must be an integer >= 1, got {self.num_slots!r}")
        if int(self.start_slot) != self.start_slot:
            raise ValueError(f"start_slot must be an integer, got {self.start_slot!r}")
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be positive")

    @property
    def end_slot(self) -> int:
        return self.start_slot + self.num_slots - 1

    def contains(self, slot: int) -> bool:
        return self.start_slot <= slot <= self.end_slot

    def index(self, slot: int) -> int:
        """Array index of an absolute slot."""
        return slot - self.start_slot


@dataclass(frozen=True)
class ApplianceChoice:
    """A point in one appliance's decision space.

    Exactly one of ``start`` (non-interruptible) or ``slots``
    (interruptible, sorted ascending) is set.
    """

    appliance_id: str
    start: int | None = None
    slots: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.start is None) == (self.slots is None):
            raise InvalidChoice(
                f"choice for {self.appliance_id!r} must set exactly one of start/slots"
            )
        if self.slots is not None:
            object.__setattr__(self, "slots", tuple(sorted(int(s) for s in self.slots)))

    @property
    def encoding(self) -> tuple[int, ...]:
        """Tuple used for deterministic lexicographic tie-breaking."""
        return (self.start,) if self.start is not None else self.slots


@dataclass(frozen=True)
class Appliance:
    """A flexible load.

    Use :meth:`non_interruptible` or :meth:`interruptible` rather than the
    raw constructor. ``window`` is an inclusive pair of absolute slots.
    """

    id: str
    kind: ApplianceKind
    window: tuple[int, int]
    profile: tuple[float, ...] = ()
    duration: int = 0
    power: float = 0.0

    def __post_init__(self):
        kind = ApplianceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        lo, hi = (int(w) for w in self.window)
        object.__setattr__(self, "window", (lo, hi))
        if hi < lo:
            raise ValueError(f"appliance {self.id!r}: empty window {self.window}")
        wlen = hi - lo + 1
        if kind is ApplianceKind.NON_INTERRUPTIBLE:
            profile = tuple(float(p) for p in self.profile)
            if not profile:
                raise ValueError(f"appliance {self.id!r}: empty profile")
            if not all(p > 0 and math.isfinite(p) for p in profile):
                raise ValueError(f"appliance {self.id!r}: profile powers must be finite and > 0")
            if len(profile) > wlen:
                raise ValueError(
                    f"appliance {self.id!r}: profile length {len(profile)} exceeds window length {wlen}"
                )
            object.__setattr__(self, "profile", profile)
            object.__setattr__(self, "duration", len(profile))
            object.__setattr__(self, "power", 0.0)
        else:
            d = int(self.duration)
            if d != self.duration or not 1 <= d <= wlen:
                raise ValueError(
                    f"appliance {self.id!r}: duration {self.duration!r} not in [1, {wlen}]"
                )
            power = float(self.power)
            if not (power > 0 and math.isfinite(power)):
                raise ValueError(f"appliance {self.id!r}: power must be finite and > 0")
            if self.profile:
                raise ValueError(f"appliance {self.id!r}: interruptible loads take no profile")
            object.__setattr__(self, "duration", d)
            object.__setattr__(self, "power", power)

    @classmethod
    def non_interruptible(cls, id: str, window: tuple[int, int], profile: Sequence[float]) -> "Appliance":
        return cls(id, ApplianceKind.NON_INTERRUPTIBLE, tuple(window), profile=tuple(profile))

    @classmethod
    def interruptible(cls, id: str, window: tuple[int, int], duration: int, power: float) -> "Appliance":
        return cls(id, ApplianceKind.INTERRUPTIBLE, tuple(window), duration=duration, power=power)

    @property
    def window_length(self) -> int:
        return self.window[1] - self.window[0] + 1

    @property
    def energy(self) -> float:
        """Total energy drawn, identical for every choice."""
        if self.kind is ApplianceKind.NON_INTERRUPTIBLE:
            return math.fsum(self.profile)
        return self.duration * self.power

    @property
    def peak(self) -> float:
        if self.kind is ApplianceKind.NON_INTERRUPTIBLE:
            return max(self.profile)
        return self.power

    def num_choices(self) -> int:
        if self.kind is ApplianceKind.NON_INTERRUPTIBLE:
            return self.window_length - self.duration + 1
        return math.comb(self.window_length, self.duration)

    def choices(self) -> Iterator[ApplianceChoice]:
        """All decisions, in ascending lexicographic order of encoding."""
        lo, hi = self.window
        if self.kind is ApplianceKind.NON_INTERRUPTIBLE:
            for s in range(lo, hi - self.duration + 2):
                yield ApplianceChoice(self.id, start=s)
        else:
            for slots in itertools.combinations(range(lo, hi + 1), self.duration):
                yield ApplianceChoice(self.id, slots=slots)

    def check_choice(self, choice: ApplianceChoice) -> None:
        lo, hi = self.window
        if choice.appliance_id != self.id:
            raise InvalidChoice(f"choice for {choice.appliance_id!r} given to appliance {self.id!r}")
        if self.kind is ApplianceKind.NON_INTERRUPTIBLE:
            if choice.start is None:
                raise InvalidChoice(f"appliance {self.id!r} needs a start slot")
            if not (lo <= choice.start and choice.start + self.duration - 1 <= hi):
                raise InvalidChoice(
                    f"appliance {self.id!r}: start {choice.start} with duration {self.duration} "
                    f"leaves window [{lo}, {hi}]"
                )
        else:
            if choice.slots is None:
                raise InvalidChoice(f"appliance {self.id!r} needs a slot subset")
            slots = choice.slots
            if len(slots) != self.duration or len(set(slots)) != len(slots):
                raise InvalidChoice(
                    f"appliance {self.id!r}: expected {self.duration} distinct slots, got {slots}"
                )
            if slots and (slots[0] < lo or slots[-1] > hi):
                raise InvalidChoice(f"appliance {self.id!r}: slots {slots} leave window [{lo}, {hi}]")


@dataclass(frozen=True)
class HouseholdSpec:
    id: str
    appliances: tuple[Appliance, ...] = field(default_factory=tuple)

    def __post_init__(self):
        apps = tuple(self.appliances)
        object.__setattr__(self, "appliances", apps)
        if not apps:
            raise MissingChoice(f"household {self.id!r} has no appliances")
        ids = [a.id for a in apps]
        if len(set(ids)) != len(ids):
            raise ValueError(f"household {self.id!r}: duplicate appliance ids")

    def check_horizon(self, horizon: TimeHorizon) -> None:
        for a in self.appliances:
            lo, hi = a.window
            if not (horizon.contains(lo) and horizon.contains(hi)):
                raise ValueError(
                    f"household {self.id!r}: appliance {a.id!r} window [{lo}, {hi}] outside horizon "
                    f"[{horizon.start_slot}, {horizon.end_slot}]"
                )

    @property
    def energy(self) -> float:
        return math.fsum(a.energy for a in self.appliances)

    def num_joint_choices(self) -> int:
        return math.prod(a.num_choices() for a in self.appliances)


def choice_demand(appliance: Appliance, choice: ApplianceChoice, horizon: TimeHorizon) -> np.ndarray:
    """Length-T profile of one appliance under one decision."""
    appliance.check_choice(choice)
    lo, hi = appliance.window
    if not (horizon.contains(lo) and horizon.contains(hi)):
        raise InvalidChoice(f"appliance {appliance.id!r} window lies outside the horizon")
    x = np.zeros(horizon.num_slots)
    if appliance.kind is ApplianceKind.NON_INTERRUPTIBLE:
        i = horizon.index(choice.start)
        x[i : i + appliance.duration] = appliance.profile
    else:
        x[[horizon.index(s) for s in choice.slots]] = appliance.power
    return x


def household_demand(
    spec: HouseholdSpec, choices: Sequence[ApplianceChoice], horizon: TimeHorizon
) -> np.ndarray:
    """Aggregate household profile for one decision per appliance."""
    by_id: dict[str, ApplianceChoice] = {}
    for c in choices:
        if c.appliance_id in by_id:
            raise DuplicateChoice(f"household {spec.id!r}: two choices for {c.appliance_id!r}")
        by_id[c.appliance_id] = c
    known = {a.id for a in spec.appliances}
    extra = set(by_id) - known
    if extra:
        raise InvalidChoice(f"household {spec.id!r}: unknown appliances {sorted(extra)}")
    x = np.zeros(horizon.num_slots)
    for a in spec.appliances:
        if a.id not in by_id:
            raise MissingChoice(f"household {spec.id!r}: no choice for {a.id!r}")
        x += choice_demand(a, by_id[a.id], horizon)
    return x


def prox_constant(spec: HouseholdSpec, horizon: TimeHorizon, mode: str = "min") -> float:
    """``min`` (or ``max``) of ``0.5 * ||x||^2`` over the household's feasible set.

    ``min`` runs the exact household solver at zero prices with unit
    smoothing, whose objective is then exactly half the squared norm.
    """
    from .subproblem import max_half_norm_sq, solve_household_exact

    if mode == "min":
        return solve_household_exact(spec, np.zeros(horizon.num_slots), 1.0, horizon).objective
    if mode == "max":
        return max_half_norm_sq(spec, horizon)
    raise ValueError(f"prox mode must be 'min' or 'max', got {mode!r}")
