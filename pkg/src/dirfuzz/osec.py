"""Solver-side scheduling: which seed to hand to the solver next, which of
its unexplored branches to skip, and how long to let each attempt run."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .program import UNREACHABLE, BbDistanceMap

SOLVED = "SOLVED"
FAILED = "FAILED"
TIMEOUT = "TIMEOUT"

DELTA = 0.1

PRUNE_UNREACHABLE = "unreachable"
PRUNE_UNSOLVABLE = "unsolvable"


class NotApplicable(ValueError):
    """Raised when a seed has no unexplored branches."""


@dataclass
class SolveAttemptStats:
    attempts: dict = field(default_factory=dict)
    unsolvable: set = field(default_factory=set)
    solved: set = field(default_factory=set)

    def sa(self, br) -> int:
        return self.attempts.get(br, 1)

    def enqueue(self, br) -> None:
        self.attempts.setdefault(br, 1)

    def record(self, br, verdict: "SolverVerdict", at_cap: bool) -> None:
        self.enqueue(br)
        if verdict.outcome == SOLVED:
            self.solved.add(br)
            self.unsolvable.discard(br)
            return
        self.attempts[br] += 1
        if verdict.outcome == TIMEOUT and at_cap and br not in self.solved:
            self.unsolvable.add(br)


@dataclass(frozen=True)
class BudgetPolicy:
    lower: float = 5.0
    upper: float = 900.0
    increment: float = 60.0

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower budget exceeds upper budget")
        if self.increment <= 0:
            raise ValueError("budget increment must be positive")


@dataclass(frozen=True)
class SolverVerdict:
    outcome: str
    cost: float
    input: bytes | None = None

    def __post_init__(self):
        if self.outcome not in (SOLVED, FAILED, TIMEOUT):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome == SOLVED and not self.input:
            raise ValueError("SOLVED verdict needs a non-empty input")
        if self.cost < 0:
            raise ValueError("negative solver cost")


@dataclass(frozen=True)
class PathQuery:
    """Opaque stand-in for a seed's path constraints."""

    program: object
    input: bytes
    trace: object


def budget_for(br, stats: SolveAttemptStats, policy: BudgetPolicy = BudgetPolicy()) -> float:
    return min(policy.lower + policy.increment * (stats.sa(br) - 1), policy.upper)


def edf(theta, t) -> float:
    if not theta:
        raise NotApplicable("no unexplored branches")
    return sum(t.probability(br) for br in theta) / len(theta)


def eds(theta, stats: SolveAttemptStats) -> float:
    if not theta:
        raise NotApplicable("no unexplored branches")
    return sum(stats.sa(br) for br in theta) / len(theta)


def _shifted(values: dict) -> dict:
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        return {k: 0.5 + DELTA for k in values}
    return {k: (v - lo) / (hi - lo) + DELTA for k, v in values.items()}


def priority_score(inputs: dict) -> dict:
    """Scores from raw ``{seed_id: (edf, eds, d_s)}`` triples.

    Each component is min-max normalised over the queued seeds and shifted by
    ``DELTA`` so no term is zero.
    """
    if not inputs:
        raise ValueError("empty queue")
    f = _shifted({k: v[0] for k, v in inputs.items()})
    s = _shifted({k: v[1] for k, v in inputs.items()})
    d = _shifted({k: v[2] for k, v in inputs.items()})
    return {k: f[k] / (s[k] * d[k]) for k in inputs}


def prune_unreachable(theta, d: BbDistanceMap) -> tuple:
    pruned = frozenset(br for br in theta if d[br[1]] is UNREACHABLE)
    return frozenset(theta) - pruned, pruned


def prune_unsolvable(br, stats: SolveAttemptStats, predecessor_chain) -> bool:
    if br in stats.unsolvable:
        return True
    return any(p in stats.unsolvable for p in predecessor_chain)


def predecessor_chain(trace, br) -> tuple:
    """Trace branches taken before the first visit of br's source."""
    k = trace.blocks.index(br[0])
    return trace.branches[:k]


class SimulatedSolver:
    """Solver stand-in driven by per-branch fixture annotations.

    A branch is solved iff it is annotated solvable and its declared cost
    fits the budget; the input is then built by the program's own path
    constraint synthesiser.
    """

    def solve(self, query: PathQuery, br, budget: float) -> SolverVerdict:
        ann = query.program.solver_annotation(br)
        if not ann.solvable or ann.solve_cost_s > budget:
            return SolverVerdict(TIMEOUT, budget)
        data = query.program.synthesize(query.input, query.trace, br)
        if data is None:
            return SolverVerdict(FAILED, ann.solve_cost_s)
        return SolverVerdict(SOLVED, ann.solve_cost_s, data)


class NullSolver:
    """Never produces inputs. A campaign with this solver skips the solver stage."""

    def solve(self, query: PathQuery, br, budget: float) -> SolverVerdict:
        return SolverVerdict(FAILED, 0.0)


class OsecQueue:
    """Seeds waiting for the solver, ordered by descending score then id."""

    def __init__(self):
        self.members: set = set()
        self.order: list = []
        self.scores: dict = {}
        self.cache: dict = {}
        # branches already dismissed for a given seed
        self.dropped: dict = {}

    def __len__(self):
        return len(self.members)

    def add(self, seed_id: int) -> None:
        self.members.add(seed_id)
        self.dropped.setdefault(seed_id, set())

    def theta(self, seed, stats: SolveAttemptStats) -> frozenset:
        return frozenset(br for br in seed.unexplored
                         if br not in self.dropped.get(seed.id, ()) and br not in stats.solved)

    def resort(self, seeds: dict, stats: SolveAttemptStats, t) -> None:
        raw = {}
        for sid in sorted(self.members):
            s = seeds[sid]
            th = self.theta(s, stats)
            if not th:
                continue
            raw[sid] = (edf(th, t), eds(th, stats), s.distance_value)
        self.members = set(raw)
        self.cache = raw
        if not raw:
            self.order, self.scores = [], {}
            return
        finite = [v[2] for v in raw.values() if math.isfinite(v[2])]
        cap = (max(finite) if finite else 1.0) + 1.0
        raw = {k: (a, b, c if math.isfinite(c) else cap) for k, (a, b, c) in raw.items()}
        self.scores = priority_score(raw)
        self.order = sorted(raw, key=lambda k: (-self.scores[k], k))

    def top(self):
        return self.order[0] if self.order else None


class OsecScheme:
    """Queue, attempt statistics and budget policy bundled for a campaign."""

    def __init__(self, program, d: BbDistanceMap, solver, policy: BudgetPolicy = BudgetPolicy()):
        self.program = program
        self.d = d
        self.solver = solver
        self.policy = policy
        self.stats = SolveAttemptStats()
        self.queue = OsecQueue()
        self.calls = 0

    def add(self, seed) -> None:
        self.queue.add(seed.id)
        for br in seed.unexplored:
            self.stats.enqueue(br)

    def step(self, seeds: dict, t, now: float, emit) -> tuple:
        """Solve the top seed's kept branches.

        Seeds whose branches are all pruned are consumed without using the
        step. Returns ``(new inputs as (seed_id, branch, bytes), cost)``.
        """
        q, stats = self.queue, self.stats
        new, cost = [], 0.0
        while True:
            q.resort(seeds, stats, t)
            sid = q.top()
            if sid is None:
                return new, cost
            seed = seeds[sid]
            theta = sorted(q.theta(seed, stats))
            calls = 0
            _, unreachable = prune_unreachable(theta, self.d)
            for br in theta:
                if br in unreachable:
                    q.dropped[sid].add(br)
                    emit(now + cost, "BRANCH_PRUNED",
                         {"seed": sid, "branch": list(br), "reason": PRUNE_UNREACHABLE})
                    continue
                chain = predecessor_chain(seed.trace, br)
                if prune_unsolvable(br, stats, chain):
                    q.dropped[sid].add(br)
                    emit(now + cost, "BRANCH_PRUNED",
                         {"seed": sid, "branch": list(br), "reason": PRUNE_UNSOLVABLE})
                    continue
                budget = budget_for(br, stats, self.policy)
                verdict = self.solver.solve(PathQuery(self.program, seed.input, seed.trace), br, budget)
                if verdict.cost > budget:
                    raise RuntimeError("solver exceeded its budget")
                calls += 1
                self.calls += 1
                cost += verdict.cost
                at_cap = budget >= self.policy.upper
                stats.record(br, verdict, at_cap)
                payload = {
                    "seed": sid,
                    "branch": list(br),
                    "budget": budget,
                    "verdict": verdict.outcome,
                    "cost": verdict.cost,
                    "unsolvable": br in stats.unsolvable,
                }
                if verdict.outcome == SOLVED:
                    payload["input"] = verdict.input.hex()
                    new.append((sid, br, verdict.input))
                emit(now + cost, "SOLVE_ATTEMPT", payload)
            if calls:
                q.resort(seeds, stats, t)
                return new, cost


def symbolic_step(scheme: OsecScheme, seeds: dict, t, now: float, emit=lambda *a: None) -> tuple:
    return scheme.step(seeds, t, now, emit)
