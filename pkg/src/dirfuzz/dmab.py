"""Reward-driven power schedule.

Each seed is an arm. Its reward expectation is the inverse seed distance
times the mean probability of the branches it could still open up; the
expectations are min-max normalised across the corpus and mapped onto an
energy multiplier between 1/32 and 32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .probability import NO_DISTANCE, BranchStatsTable, TraceView
from .program import ProgramGraph

EPSILON = 1e-6
BASE_ENERGY = 128
MAX_FACTOR = 32


@dataclass
class SeedEntry:
    id: int
    input: bytes
    trace: TraceView
    distance: object = NO_DISTANCE
    unexplored: frozenset = frozenset()
    base_energy: float = float(BASE_ENERGY)
    reward_expectation: float = 0.0
    found_at: float = 0.0
    origin: str = "fuzz"
    parent: int | None = None
    reachable: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def distance_value(self) -> float:
        if self.distance is NO_DISTANCE:
            return math.inf
        return self.distance.value


@dataclass(frozen=True)
class EnergyAssignment:
    seed_id: int
    energy: float

    @property
    def mutations(self) -> int:
        return max(1, math.ceil(self.energy))


def unexplored_branches(trace: TraceView, covered, g: ProgramGraph) -> frozenset:
    """Siblings of traversed branches that no execution has covered yet."""
    taken = set(trace.branches)
    out = set()
    for src in dict.fromkeys(src for src, _ in trace.branches):
        for br in g.out_branches(src):
            if br not in taken and br not in covered:
                out.add(br)
    return frozenset(out)


def _mean_probability(branches, t: BranchStatsTable) -> float:
    return sum(t.probability(br) for br in branches) / len(branches)


def reward_expectation(s: SeedEntry, t: BranchStatsTable) -> float:
    if not s.unexplored:
        return 0.0
    d = s.distance
    ds = math.inf if d is NO_DISTANCE else d.value
    reward = 1.0 / max(ds, EPSILON)
    return reward * _mean_probability(s.unexplored, t)


def normalize(expectations: dict) -> dict:
    if not expectations:
        raise ValueError("nothing to normalise")
    lo = min(expectations.values())
    hi = max(expectations.values())
    if hi == lo:
        return {k: 0.5 for k in expectations}
    span = hi - lo
    return {k: (v - lo) / span for k, v in expectations.items()}


def energy_multiplier(e_norm: float) -> float:
    return 2.0 ** (10.0 * e_norm - 5.0)


def assign_energy(s: SeedEntry, e_norm: float) -> EnergyAssignment:
    if s.base_energy <= 0:
        raise ValueError("base energy must be positive")
    if s.unexplored:
        return EnergyAssignment(s.id, s.base_energy * energy_multiplier(e_norm))
    return EnergyAssignment(s.id, s.base_energy / MAX_FACTOR)


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def base_energy(exec_time: float, trace_len: float, avg_exec_time: float, avg_trace_len: float,
                e0: float = BASE_ENERGY) -> float:
    """AFL-flavoured base energy: fast and broad seeds get more mutations."""
    if avg_exec_time <= 0 or avg_trace_len <= 0:
        raise ValueError("averages must be positive")
    speed = _clamp(avg_exec_time / exec_time, 0.25, 4.0) if exec_time > 0 else 4.0
    breadth = _clamp(trace_len / avg_trace_len, 0.25, 4.0)
    return e0 * speed * breadth


def dmab_energies(seeds, t: BranchStatsTable) -> list:
    """Energy for every seed; normalisation spans seeds that still have unexplored branches."""
    for s in seeds:
        s.reward_expectation = reward_expectation(s, t)
    active = {s.id: s.reward_expectation for s in seeds if s.unexplored}
    norm = normalize(active) if active else {}
    return [assign_energy(s, norm.get(s.id, 0.0)) for s in seeds]
