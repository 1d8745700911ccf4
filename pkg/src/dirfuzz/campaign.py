"""Fuzzing campaign on a logical clock.

One ``random.Random`` stream drives every mutation; nothing else draws from
it, so a campaign is a pure function of (program, config).
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field

from .dmab import BASE_ENERGY, SeedEntry, base_energy, dmab_energies, unexplored_branches
from .osec import BudgetPolicy, OsecScheme, SimulatedSolver
from .probability import DEFAULT_REFRESH_INTERVAL, BranchStatsTable, seed_distance
from .program import UNREACHABLE, arithmetic_seed_distance, compute_bb_distance

SCHEDULERS = ("distance_only", "aflgo_like", "only_pb", "pb_dmab", "hypergo")
SOLVERS = ("simulated", "null")

US = 1_000_000
CLOCK_LIMIT = 2**63 - 1

INTERESTING_8 = (0x00, 0x01, 0x7F, 0x80, 0xFF)
INTERESTING_16 = (0x0000, 0x0001, 0x007F, 0x0080, 0x00FF, 0x0100, 0x7FFF, 0x8000, 0xFFFF)
INTERESTING_32 = INTERESTING_16 + (0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)


class ConfigError(ValueError):
    pass


@dataclass
class CampaignConfig:
    scheduler: str = "hypergo"
    rng_seed: int = 0
    budget: float = 3600.0
    refresh_interval: float = DEFAULT_REFRESH_INTERVAL
    policy: BudgetPolicy = field(default_factory=BudgetPolicy)
    osec_interval: int = 1000
    anneal_time: float = 600.0
    base_energy: float = BASE_ENERGY
    solver: str = "simulated"
    stop_when_all_reached: bool = True

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if not self.budget >= 0:
            raise ConfigError("budget must be non-negative")
        if self.refresh_interval <= 0:
            raise ConfigError("refresh interval must be positive")
        if self.osec_interval < 1:
            raise ConfigError("osec interval must be at least 1")
        if self.base_energy <= 0:
            raise ConfigError("base energy must be positive")
        if self.anneal_time <= 0:
            raise ConfigError("anneal time must be positive")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng seed must fit in 64 bits")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CampaignEvent:
    t: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"))


# -- mutation ------------------------------------------------------------------


def mutate(data: bytes, rng: random.Random) -> bytes:
    """Havoc-style stack of 1 to 8 byte-level edits.

    Draws come only from ``rng.random()`` scaled to the needed range, which
    keeps the draw order simple and is several times cheaper than
    ``randrange``.
    """
    r = rng.random
    if not data:
        return bytes([int(r() * 256)])
    buf = bytearray(data)
    limit = 2 * len(data) + 8
    for _ in range(1 + int(r() * 8)):
        n = len(buf)
        op = int(r() * 7)
        if op == 0:
            bit = int(r() * n * 8)
            buf[bit >> 3] ^= 1 << (bit & 7)
        elif op == 1:
            buf[int(r() * n)] = INTERESTING_8[int(r() * len(INTERESTING_8))]
        elif op == 2:
            i = int(r() * n)
            delta = 1 + int(r() * 35)
            buf[i] = (buf[i] + (delta if r() < 0.5 else -delta)) & 0xFF
        elif op == 3:
            width = 2 if r() < 0.5 else 4
            if n >= width:
                pos = int(r() * (n - width + 1))
                table = INTERESTING_16 if width == 2 else INTERESTING_32
                val = table[int(r() * len(table))]
                buf[pos:pos + width] = val.to_bytes(width, "little" if r() < 0.5 else "big")
        elif op == 4:
            room = limit - n
            if room > 0:
                length = 1 + int(r() * min(n, room))
                src = int(r() * (n - length + 1))
                dst = int(r() * (n + 1))
                buf[dst:dst] = buf[src:src + length]
        elif op == 5:
            if n > 1:
                length = 1 + int(r() * (n - 1))
                pos = int(r() * (n - length + 1))
                del buf[pos:pos + length]
        else:
            buf[int(r() * n)] = int(r() * 256)
    return bytes(buf)


def is_interesting(trace, covered) -> bool:
    return not covered.issuperset(trace.branches)


# -- corpus --------------------------------------------------------------------


class Corpus:
    def __init__(self):
        self.seeds: list = []
        self.by_input: dict = {}
        self.covered: set = set()

    def __len__(self):
        return len(self.seeds)

    def __iter__(self):
        return iter(self.seeds)

    @property
    def reachable_seed_count(self) -> int:
        return sum(1 for s in self.seeds if s.reachable)

    @property
    def total_seed_count(self) -> int:
        return len(self.seeds)


# -- schedulers ----------------------------------------------------------------


def _greedy_energy(seeds, dist, anneal=None) -> list:
    """Energy from normalised distance: close seeds get up to 32x base."""
    finite = [dist(s) for s in seeds if math.isfinite(dist(s))]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 0.0)
    out = []
    for s in seeds:
        d = dist(s)
        if not math.isfinite(d):
            dn = 1.0
        elif hi == lo:
            dn = 0.5
        else:
            dn = (d - lo) / (hi - lo)
        p = 1.0 - dn
        if anneal is not None:
            p = p * (1.0 - anneal) + 0.5 * anneal
        out.append((s, s.base_energy * 2.0 ** (10.0 * p - 5.0)))
    return out


def _arith(s):
    v = s.extra.get("arith")
    return math.inf if v is None else v


def scheduler_energies(name: str, seeds, table, now: float, anneal_time: float) -> list:
    if name == "distance_only":
        return _greedy_energy(seeds, _arith)
    if name == "aflgo_like":
        temperature = 20.0 ** (-now / anneal_time)
        return _greedy_energy(seeds, _arith, anneal=temperature)
    if name == "only_pb":
        return _greedy_energy(seeds, lambda s: s.distance_value)
    if name in ("pb_dmab", "hypergo"):
        return [(s, e.energy) for s, e in zip(seeds, dmab_energies(seeds, table))]
    raise ConfigError(f"unknown scheduler {name!r}")


# -- campaign ------------------------------------------------------------------


class Campaign:
    def __init__(self, program, cfg: CampaignConfig, initial_seeds=None):
        self.program = program
        self.cfg = cfg
        self.graph = program.graph
        self.d = compute_bb_distance(self.graph)
        self.table = BranchStatsTable(self.graph, cfg.refresh_interval)
        self.rng = random.Random(cfg.rng_seed)
        self.corpus = Corpus()
        self.events: list = []
        self.clock_us = 0
        self.exec_us = round(program.exec_cost * US)
        self.budget_us = round(cfg.budget * US)
        self.refresh_us = round(cfg.refresh_interval * US)
        self.last_refresh_us = 0
        self.executions = 0
        self.solver_calls = 0
        self.solver_us = 0
        self.ttr: dict = {}
        self.targets_left = set(self.graph.targets)
        self._new_cover: set = set()
        self._entry_dist = self.d[self.graph.entry]
        self.cycles = 0
        seeds = list(program.initial_seeds if initial_seeds is None else initial_seeds)
        if not seeds:
            raise ConfigError("at least one initial seed is required")
        self.initial_seeds = [bytes(s) for s in seeds]
        self.osec = None
        if cfg.scheduler == "hypergo" and cfg.solver != "null":
            self.osec = OsecScheme(program, self.d, SimulatedSolver(), cfg.policy)
        self._gen = None

    # -- bookkeeping -----------------------------------------------------------

    @property
    def now(self) -> float:
        return self.clock_us / US

    def emit(self, t: float, kind: str, payload: dict) -> None:
        self.events.append(CampaignEvent(round(t, 6), kind, payload))

    def _advance(self, us: int) -> None:
        self.clock_us += us
        if self.clock_us > CLOCK_LIMIT:
            raise OverflowError("logical clock overflow")

    def done(self) -> bool:
        if self.clock_us >= self.budget_us:
            return True
        return self.cfg.stop_when_all_reached and not self.targets_left

    def _is_reachable(self, trace) -> bool:
        d = self.d
        if not self.graph.targets.isdisjoint(trace.blocks):
            return True
        best = min((d[b] for b in trace.blocks if d[b] is not UNREACHABLE), default=None)
        if best is None or self._entry_dist is UNREACHABLE:
            return False
        return best < self._entry_dist

    def _recompute_distances(self) -> None:
        for s in self.corpus.seeds:
            s.distance = seed_distance(self.table, self.d, s.trace)

    def _apply_coverage(self) -> None:
        if not self._new_cover:
            return
        fresh = self._new_cover
        for s in self.corpus.seeds:
            if s.unexplored and not fresh.isdisjoint(s.unexplored):
                s.unexplored = s.unexplored - fresh
        self._new_cover = set()

    # -- execution -------------------------------------------------------------

    def _run_input(self, data: bytes, origin: str, parent):
        trace = self.program.execute(data)
        self._advance(self.exec_us)
        self.executions += 1
        self.table.record(trace.branches)
        if self.clock_us - self.last_refresh_us >= self.refresh_us:
            self.table.refresh(self.now)
            self.last_refresh_us = self.clock_us
            self._recompute_distances()
        if self.targets_left and not self.targets_left.isdisjoint(trace.blocks):
            for tgt in sorted(self.targets_left.intersection(trace.blocks)):
                self.ttr[tgt] = self.now
                self.emit(self.now, "TARGET_REACHED", {
                    "target": self.graph.label(tgt), "input": data.hex(), "origin": origin,
                    "parent": parent,
                })
            self.targets_left.difference_update(trace.blocks)
        admitted = None
        if is_interesting(trace, self.corpus.covered) and data not in self.corpus.by_input:
            admitted = self._admit(data, trace, origin, parent)
        return trace, admitted

    def _admit(self, data: bytes, trace, origin: str, parent) -> SeedEntry:
        corpus = self.corpus
        new = [br for br in dict.fromkeys(trace.branches) if br not in corpus.covered]
        corpus.covered.update(new)
        self._new_cover.update(new)
        self._apply_coverage()
        seed = SeedEntry(
            id=len(corpus.seeds),
            input=data,
            trace=trace,
            distance=seed_distance(self.table, self.d, trace),
            unexplored=unexplored_branches(trace, corpus.covered, self.graph),
            found_at=self.now,
            origin=origin,
            parent=parent,
            reachable=self._is_reachable(trace),
        )
        seed.extra["arith"] = arithmetic_seed_distance(self.d, trace.blocks)
        corpus.seeds.append(seed)
        corpus.by_input[data] = seed
        if self.osec is not None:
            self.osec.add(seed)
        self.emit(self.now, "SEED_ADMITTED", {
            "seed": seed.id,
            "origin": origin,
            "parent": parent,
            "input": data.hex(),
            "trace": list(trace.blocks),
            "reachable": seed.reachable,
            "new_branches": [list(br) for br in new],
        })
        return seed

    def _osec_step(self) -> None:
        self._apply_coverage()
        seeds = {s.id: s for s in self.corpus.seeds}
        new, cost = self.osec.step(seeds, self.table, self.now, self.emit)
        self.solver_calls = self.osec.calls
        cost_us = round(cost * US)
        self.solver_us += cost_us
        self._advance(cost_us)
        for sid, br, data in new:
            trace, _ = self._run_input(data, "solver", sid)
            if br not in trace.branches:
                raise RuntimeError(f"solver input for seed {sid} misses branch {br}")

    def _set_base_energies(self) -> None:
        seeds = self.corpus.seeds
        avg_len = sum(len(s.trace.blocks) for s in seeds) / len(seeds)
        cost = self.program.exec_cost
        for s in seeds:
            s.base_energy = base_energy(cost, len(s.trace.blocks), cost, avg_len, self.cfg.base_energy)

    # -- main loop -------------------------------------------------------------

    def _loop(self):
        for data in self.initial_seeds:
            self._run_input(data, "init", None)
            yield
        if not self.corpus.seeds:
            # every initial seed repeated an earlier one's coverage
            first = self.initial_seeds[0]
            trace = self.program.execute(first)
            self._admit(first, trace, "init", None)
        since_osec = 0
        while not self.done():
            self._apply_coverage()
            self._set_base_energies()
            seeds = list(self.corpus.seeds)
            plan = scheduler_energies(self.cfg.scheduler, seeds, self.table, self.now, self.cfg.anneal_time)
            plan = [(s, max(1, math.ceil(e))) for s, e in plan]
            self.cycles += 1
            self.emit(self.now, "ENERGY_CYCLE", {
                "cycle": self.cycles,
                "energy": [[s.id, n] for s, n in plan],
            })
            for seed, n in plan:
                for _ in range(n):
                    if self.done():
                        return
                    self._run_input(mutate(seed.input, self.rng), "fuzz", seed.id)
                    since_osec += 1
                    yield
                    if self.osec is not None and since_osec >= self.cfg.osec_interval:
                        since_osec = 0
                        if not self.done():
                            self._osec_step()
                            yield

    def run_until(self, stop) -> bool:
        """Advance until ``stop()`` holds after an execution; False if the campaign ended first."""
        if self._gen is None:
            self._gen = self._loop()
        for _ in self._gen:
            if stop():
                return True
        return False

    def run(self) -> "Campaign":
        self.run_until(lambda: False)
        return self

    # -- results ---------------------------------------------------------------

    def summary(self) -> dict:
        seeds = self.corpus.seeds
        rseeds = self.corpus.reachable_seed_count
        return {
            "program": self.program.name,
            "scheduler": self.cfg.scheduler,
            "rng_seed": self.cfg.rng_seed,
            "budget": self.cfg.budget,
            "ttr": {self.graph.label(t): self.ttr.get(t) for t in sorted(self.graph.targets)},
            "rseeds": rseeds,
            "prseed": rseeds / len(seeds) if seeds else 0.0,
            "srseeds": sum(1 for s in seeds if s.reachable and s.origin == "solver"),
            "seeds": len(seeds),
            "executions": self.executions,
            "solver_calls": self.solver_calls,
            "solver_time": self.solver_us / US,
            "final_time": self.now,
            "covered_branches": len(self.corpus.covered),
        }

    def events_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


def run_campaign(cfg: CampaignConfig, program, initial_seeds=None) -> tuple:
    c = Campaign(program, cfg, initial_seeds).run()
    return c.events, c.summary()


def summary_from_events(events, graph) -> dict:
    """Recompute the seed metrics and TTRs from a raw event stream."""
    admitted = [e for e in events if e.kind == "SEED_ADMITTED"]
    rseeds = sum(1 for e in admitted if e.payload["reachable"])
    ttr = {graph.label(t): None for t in sorted(graph.targets)}
    for e in events:
        if e.kind == "TARGET_REACHED" and ttr.get(e.payload["target"]) is None:
            ttr[e.payload["target"]] = e.t
    return {
        "ttr": ttr,
        "rseeds": rseeds,
        "prseed": rseeds / len(admitted) if admitted else 0.0,
        "srseeds": sum(1 for e in admitted if e.payload["reachable"] and e.payload["origin"] == "solver"),
        "seeds": len(admitted),
        "solver_calls": sum(1 for e in events if e.kind == "SOLVE_ATTEMPT"),
    }
