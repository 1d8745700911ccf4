"""Branch hit statistics, path probabilities and probability-weighted distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .program import UNREACHABLE, BbDistanceMap, ProgramGraph

HIT_CAP = 2**64 - 1
DEFAULT_REFRESH_INTERVAL = 60.0


class UnknownBranchError(KeyError):
    pass


class NotOnTraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceView:
    """Blocks visited from the entry, and the branches taken between them."""

    blocks: tuple
    branches: tuple

    @classmethod
    def from_blocks(cls, blocks) -> "TraceView":
        blocks = tuple(blocks)
        return cls(blocks, tuple(zip(blocks, blocks[1:])))

    def dedup_blocks(self, d: BbDistanceMap) -> list:
        """Distinct blocks with a finite BB distance, in first-visit order."""
        return [b for b in dict.fromkeys(self.blocks) if d[b] is not UNREACHABLE]


@dataclass(frozen=True)
class SeedDistance:
    value: float
    is_target_hit: bool


class _NoDistance:
    def __repr__(self):
        return "NO_DISTANCE"

    def __reduce__(self):
        return (_no_distance, ())


def _no_distance():
    return NO_DISTANCE


# Outcome for traces whose blocks are all unreachable.
NO_DISTANCE = _NoDistance()


class BranchStatsTable:
    """Hit counters per branch plus a probability snapshot per sibling group.

    Probabilities only move on :meth:`refresh`; between refreshes the
    snapshot in ``prob`` is what distance computations see.
    """

    def __init__(self, g: ProgramGraph, refresh_interval: float = DEFAULT_REFRESH_INTERVAL):
        self.refresh_interval = refresh_interval
        self.groups = {b: g.out_branches(b) for b in g.blocks if g.out_branches(b)}
        self.hits: dict = {br: 0 for grp in self.groups.values() for br in grp}
        self.prob: dict = {}
        self.last_refresh = 0.0
        self.refresh_count = 0
        self._recompute()

    def hit_count(self, br) -> int:
        return min(self.hits[br], HIT_CAP)

    def record(self, branches) -> None:
        hits = self.hits
        for br in branches:
            hits[br] += 1

    def _recompute(self) -> None:
        prob = {}
        for members in self.groups.values():
            # uncovered branches count as one virtual hit
            h = [max(min(self.hits[br], HIT_CAP), 1) for br in members]
            total = sum(h)
            for br, v in zip(members, h):
                prob[br] = v / total
        self.prob = prob

    def refresh(self, now: float) -> bool:
        if now < self.last_refresh:
            raise ValueError("refresh time went backwards")
        if now - self.last_refresh < self.refresh_interval:
            return False
        self._recompute()
        self.last_refresh = now
        self.refresh_count += 1
        return True

    def probability(self, br) -> float:
        try:
            return self.prob[br]
        except KeyError:
            raise UnknownBranchError(br) from None


def record_trace(t: BranchStatsTable, trace: TraceView) -> BranchStatsTable:
    for br in trace.branches:
        if br not in t.hits:
            raise UnknownBranchError(br)
    t.record(trace.branches)
    return t


def refresh_probabilities(t: BranchStatsTable, now: float) -> BranchStatsTable:
    t.refresh(now)
    return t


def path_probability(t: BranchStatsTable, trace: TraceView, m) -> float:
    """Product of branch probabilities on the prefix up to the first visit of m."""
    try:
        idx = trace.blocks.index(m)
    except ValueError:
        raise NotOnTraceError(f"block {m!r} not on trace") from None
    p = 1.0
    for br in trace.branches[:idx]:
        p *= t.probability(br)
    return p


def probability_based_distance(d_b: float, p_path: float) -> float:
    return d_b * math.exp(-p_path)


def seed_distance(t: BranchStatsTable, d: BbDistanceMap, trace: TraceView,
                  use_probability: bool = True):
    """Geometric mean of probability-based block distances, in log-sum form.

    Returns a :class:`SeedDistance`, or ``NO_DISTANCE`` when no block on the
    trace can reach a target. ``use_probability=False`` drops the path
    probability term, leaving the plain geometric mean of BB distances.
    """
    if not trace.blocks:
        raise ValueError("empty trace")
    prob = t.prob
    seen = set()
    acc = 0.0
    n = 0
    p = 1.0
    blocks = trace.blocks
    branches = trace.branches
    for i, b in enumerate(blocks):
        if i:
            p *= prob[branches[i - 1]]
        if b in seen:
            continue
        seen.add(b)
        db = d[b]
        if db is UNREACHABLE:
            continue
        if db == 0:
            return SeedDistance(0.0, True)
        acc += math.log(db) - p if use_probability else math.log(db)
        n += 1
    if not n:
        return NO_DISTANCE
    return SeedDistance(math.exp(acc / n), False)
