"""Acceptance suite A1-A7.

Each criterion records named sub-checks through the ``check`` fixture; the
terminal summary prints one PASS/FAIL line per criterion. Sub-checks that
cannot hold for this implementation are marked strict xfail and still
report FAIL.
"""

import hashlib
import itertools
import json
import math
import random
import statistics
import time

import pytest

from dirfuzz.campaign import Campaign, CampaignConfig
from dirfuzz.cli import main as cli_main
from dirfuzz.cli import read_ttr_csv
from dirfuzz.dmab import energy_multiplier
from dirfuzz.fixtures import fig1, fig3, mini_record_parser, random_cfg
from dirfuzz.osec import BudgetPolicy, SolveAttemptStats, budget_for
from dirfuzz.probability import (
    BranchStatsTable,
    TraceView,
    path_probability,
    probability_based_distance,
    seed_distance,
)
from dirfuzz.program import (
    UNREACHABLE,
    ProgramGraph,
    arithmetic_seed_distance,
    compute_bb_distance,
)
from dirfuzz.stats import mann_whitney, vargha_delaney_a12
from dirfuzz.targets import load_program

TOL = 1e-9


def _by_label(g, *labels):
    return tuple(g.block_by_label(x) for x in labels)


def _edge(g, a, b):
    return (g.block_by_label(a), g.block_by_label(b))


# -- A1: worked numbers ---------------------------------------------------------


@pytest.fixture(scope="module")
def fig3_table():
    g = fig3().graph
    t = BranchStatsTable(g)
    t.hits[_edge(g, "b1", "b2")] = 50000
    t.hits[_edge(g, "b1", "b11")] = 50000
    t.hits[_edge(g, "b2", "b3")] = 30000
    t.hits[_edge(g, "b2", "b4")] = 70000
    t.hits[_edge(g, "b3", "b5")] = 30000
    t.hits[_edge(g, "b3", "b6")] = 70000
    assert t.refresh(60.0)
    return g, t


def test_a1_sibling_probabilities_from_hits(check, fig3_table):
    g, t = fig3_table
    p = (t.probability(_edge(g, "b1", "b2")), t.probability(_edge(g, "b1", "b11")))
    ok = all(abs(x - 0.5) <= TOL for x in p)
    assert check("A1", "b1 split 0.5/0.5", ok, f"got {p}")


def test_a1_path_probability(check, fig3_table):
    g, t = fig3_table
    trace = TraceView.from_blocks(_by_label(g, "b1", "b2", "b3", "b5", "b8", "b10"))
    p = path_probability(t, trace, g.block_by_label("b5"))
    assert check("A1", "P(path b5)=0.045", abs(p - 0.045) <= TOL, f"got {p!r}")


def _fig1_arith():
    p = fig1()
    d = compute_bb_distance(p.graph)
    t1, t2 = (p.execute(s) for s in p.initial_seeds)
    return arithmetic_seed_distance(d, t1.blocks), arithmetic_seed_distance(d, t2.blocks)


@pytest.mark.xfail(strict=True, reason="the five listed block distances sum to 13, mean 2.6")
def test_a1_arithmetic_distance_trace1_stated_value(check):
    d1, _ = _fig1_arith()
    assert check("A1", "arith trace1 = 2.3", abs(d1 - 2.3) <= TOL, f"got {d1!r}; (1+2+3+4+3)/5 = 2.6")


def test_a1_arithmetic_distance_trace1_derived_value():
    d1, _ = _fig1_arith()
    assert d1 == pytest.approx(13 / 5, abs=TOL)


def test_a1_arithmetic_distance_trace2(check):
    _, d2 = _fig1_arith()
    assert check("A1", "arith trace2 = 2.0", abs(d2 - 2.0) <= TOL, f"got {d2!r}")


def test_a1_geometric_distances(check):
    p = fig3()
    g = p.graph
    d = compute_bb_distance(g)
    t = BranchStatsTable(g)
    trace_a, trace_b = (p.execute(s) for s in p.initial_seeds)
    sa = seed_distance(t, d, trace_a)
    ok_a = sa.value == 0 and sa.is_target_hit
    check("A1", "seed A distance 0", ok_a, f"got {sa}")
    sb = seed_distance(t, d, trace_b, use_probability=False)
    ok_b = abs(sb.value - 6 ** (1 / 3)) <= TOL and round(sb.value, 2) == 1.82
    check("A1", "seed B distance cbrt(6)", ok_b, f"got {sb.value!r}")
    assert ok_a and ok_b


def test_a1_multiplier_endpoints(check):
    got = [energy_multiplier(e) for e in (0.0, 0.5, 1.0)]
    ok = all(abs(a - b) <= TOL for a, b in zip(got, (1 / 32, 1.0, 32.0)))
    assert check("A1", "multiplier {1/32,1,32}", ok, f"got {got}")


def test_a1_budget_ramp(check):
    stats = SolveAttemptStats()
    br = (0, 1)
    got = []
    for sa in range(1, 17):
        stats.attempts[br] = sa
        got.append(budget_for(br, stats))
    want = [min(5 + 60 * (k - 1), 900) for k in range(1, 17)]
    ok = got == want and want[-1] == 900 and want[:3] == [5, 65, 125] and want[-2] == 845
    assert check("A1", "budget ramp 5..900", ok, f"got {got}")


def test_a1_runtime(check):
    t0 = time.perf_counter()
    g = fig3().graph
    t = BranchStatsTable(g)
    t.refresh(60.0)
    _fig1_arith()
    [energy_multiplier(e) for e in (0, 0.5, 1)]
    elapsed = time.perf_counter() - t0
    assert check("A1", "runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f}s")


# -- A2: oracle equivalence -----------------------------------------------------


def _random_graph(rng, n=30, p_edge=0.08):
    blocks = tuple(range(n))
    branches = sorted({(a, b) for a in blocks for b in blocks if a != b and rng.random() < p_edge})
    targets = frozenset(rng.sample(blocks, rng.randint(1, 3)))
    return ProgramGraph(blocks, tuple(branches), 0, targets)


def _all_pairs_hops(g):
    # Floyd-Warshall on unit weights, independent of the BFS implementation
    n = len(g.blocks)
    inf = math.inf
    dist = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for a, b in g.branches:
        dist[a][b] = 1
    for k in range(n):
        dk = dist[k]
        for i in range(n):
            dik = dist[i][k]
            if dik == inf:
                continue
            di = dist[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    return dist


A2_ELAPSED = []


def test_a2_bb_distance_matches_brute_force(check):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        g = _random_graph(rng)
        d = compute_bb_distance(g)
        hops = _all_pairs_hops(g)
        for b in g.blocks:
            if b in g.targets:
                want = 0.0
            else:
                hs = [hops[b][t] for t in g.targets if math.isfinite(hops[b][t])]
                want = len(hs) / sum(1 / h for h in hs) if hs else UNREACHABLE
            got = d[b]
            if (want is UNREACHABLE) != (got is UNREACHABLE):
                mismatches += 1
            elif want is not UNREACHABLE and abs(got - want) > TOL * max(1.0, want):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    A2_ELAPSED.append(elapsed)
    check("A2", "BB distance vs all-pairs oracle (100 graphs)", mismatches == 0,
          f"{mismatches} mismatches, {elapsed:.2f}s")
    assert mismatches == 0


def test_a2_log_sum_matches_product_form(check):
    t0 = time.perf_counter()
    rng = random.Random(7)
    worst = 0.0
    cases = 0
    while cases < 1000:
        g = _random_graph(rng, n=rng.randint(5, 30), p_edge=0.2)
        d = compute_bb_distance(g)
        t = BranchStatsTable(g)
        for br in t.hits:
            t.hits[br] = rng.randrange(0, 50)
        t.refresh(t.refresh_interval)
        # random walk from the entry, up to 50 blocks
        blocks = [g.entry]
        length = rng.randint(1, 50)
        while len(blocks) < length and g.successors(blocks[-1]):
            blocks.append(rng.choice(g.successors(blocks[-1])))
        trace = TraceView.from_blocks(blocks)
        finite = [b for b in dict.fromkeys(blocks) if d[b] is not UNREACHABLE]
        if not finite or any(d[b] == 0 for b in finite):
            continue
        prod = 1.0
        for b in finite:
            prod *= probability_based_distance(d[b], path_probability(t, trace, b))
        naive = prod ** (1 / len(finite))
        got = seed_distance(t, d, trace).value
        worst = max(worst, abs(got - naive) / naive)
        cases += 1
    A2_ELAPSED.append(time.perf_counter() - t0)
    check("A2", "log-sum vs product form (1000 traces)", worst <= TOL, f"max rel err {worst:.2e}")
    assert worst <= TOL


def _exact_u_moments(pooled_ranks, n):
    """Mean and variance of U over every labelling of the pooled ranks."""
    us = []
    for idx in itertools.combinations(range(len(pooled_ranks)), n):
        us.append(sum(pooled_ranks[i] for i in idx) - n * (n + 1) / 2)
    mu = statistics.fmean(us)
    var = statistics.fmean((u - mu) ** 2 for u in us)
    return mu, var


def _ranks_by_counting(values):
    return [sum(1 for w in values if w < v) + (sum(1 for w in values if w == v) + 1) / 2 for v in values]


def test_a2_mann_whitney_matches_enumeration(check):
    t0 = time.perf_counter()
    rng = random.Random(11)
    worst = 0.0
    cases = 0
    for n in range(1, 6):
        for m in range(1, 6):
            for rep in range(12):
                hi = 4 if rep % 2 else 40  # alternate heavy and light ties
                a = [rng.randint(0, hi) for _ in range(n)]
                b = [rng.randint(0, hi) for _ in range(m)]
                ranks = _ranks_by_counting(a + b)
                u_pairs = sum((x > y) + 0.5 * (x == y) for x in a for y in b)
                mu, var = _exact_u_moments(ranks, n)
                if var <= 0:
                    want = 1.0
                else:
                    z = max(abs(u_pairs - mu) - 0.5, 0.0) / math.sqrt(var)
                    want = min(1.0, math.erfc(z / math.sqrt(2)))
                u, p = mann_whitney(a, b)
                worst = max(worst, abs(u - u_pairs), abs(p - want))
                cases += 1
    A2_ELAPSED.append(time.perf_counter() - t0)
    check("A2", f"Mann-Whitney vs enumeration (n,m<=5, {cases} samples)", worst <= TOL,
          f"max abs err {worst:.2e}")
    total = sum(A2_ELAPSED)
    check("A2", "runtime < 10 s", total < 10, f"{total:.2f}s")
    assert worst <= TOL and total < 10


# -- A3: motivating example -----------------------------------------------------

A3_RUNS = 20
A3_BUDGET = 60.0


def _fig1_cfg(scheduler, seed, **kw):
    return CampaignConfig(scheduler=scheduler, rng_seed=seed, budget=A3_BUDGET, refresh_interval=1.0, **kw)


def test_a3_fig1_ordering(check):
    t0 = time.perf_counter()
    prog = fig1()
    ttr = {}
    first_cycle = []
    for sched in ("distance_only", "hypergo"):
        vals = []
        for r in range(A3_RUNS):
            c = Campaign(prog, _fig1_cfg(sched, r)).run()
            v = c.ttr.get(prog.graph.block_by_label("T"))
            vals.append(1.25 * A3_BUDGET if v is None else v)
            if sched == "distance_only":
                cycle = next(e for e in c.events if e.kind == "ENERGY_CYCLE")
                first_cycle.append(dict(cycle.payload["energy"]))
        ttr[sched] = vals
    med_d = statistics.median(ttr["distance_only"])
    med_h = statistics.median(ttr["hypergo"])
    ok_ttr = med_h <= 0.5 * med_d
    check("A3", "median TTR hypergo <= 0.5 x distance_only", ok_ttr,
          f"{med_h:.3f} vs {med_d:.3f} (ratio {med_h / med_d:.3f})")

    ok_energy = all(e[1] > e[0] for e in first_cycle)
    check("A3", "distance_only favours trace-2 seed in cycle 1", ok_energy,
          f"energies {first_cycle[0]}")

    ranks = []
    for r in range(A3_RUNS):
        c = Campaign(prog, _fig1_cfg("hypergo", r, stop_when_all_reached=False))
        c.run_until(lambda: c.table.refresh_count >= 1)
        s0, s1 = c.corpus.seeds[0], c.corpus.seeds[1]
        ranks.append((s0.distance_value, s1.distance_value))
    ok_rank = all(a < b for a, b in ranks)
    check("A3", "hypergo ranks trace-1 seed closer after first refresh", ok_rank,
          f"run0 d={ranks[0][0]:.3f} vs {ranks[0][1]:.3f}")
    elapsed = time.perf_counter() - t0
    ok_time = elapsed < 60
    check("A3", "runtime < 1 min", ok_time, f"{elapsed:.1f}s")
    assert ok_ttr and ok_energy and ok_rank and ok_time


# -- A4: incremental ordering ---------------------------------------------------

A4_SCHEDULERS = ("distance_only", "only_pb", "pb_dmab", "hypergo")
A4_GRAPHS = 10
A4_RUNS = 20
A4_BUDGET = 10.0


def _a4_cfg(scheduler, r, **kw):
    return CampaignConfig(scheduler=scheduler, rng_seed=r, budget=A4_BUDGET, refresh_interval=1.0,
                          policy=BudgetPolicy(0.5, 90.0, 6.0), base_energy=16, **kw)


@pytest.fixture(scope="module")
def a4_matrix():
    t0 = time.perf_counter()
    ttr = {s: [] for s in A4_SCHEDULERS}
    for gseed in range(A4_GRAPHS):
        prog = random_cfg(60, gseed, 0.5)
        target = prog.graph.block_by_label("T")
        for sched in A4_SCHEDULERS:
            for r in range(A4_RUNS):
                c = Campaign(prog, _a4_cfg(sched, r)).run()
                v = c.ttr.get(target)
                ttr[sched].append(1.25 * A4_BUDGET if v is None else v)
    medians = {s: statistics.median(v) for s, v in ttr.items()}
    return medians, time.perf_counter() - t0


def _medians_text(medians):
    return ", ".join(f"{s}={medians[s]:.2f}" for s in A4_SCHEDULERS)


@pytest.mark.xfail(strict=True, reason="probability-weighted distance prefers shallow high-probability traces "
                                       "on these graphs; see README")
def test_a4_distance_only_not_faster_than_only_pb(check, a4_matrix):
    medians, _ = a4_matrix
    ok = medians["distance_only"] >= medians["only_pb"]
    assert check("A4", "distance_only >= only_pb", ok, _medians_text(medians))


def test_a4_only_pb_not_faster_than_pb_dmab(check, a4_matrix):
    medians, _ = a4_matrix
    assert check("A4", "only_pb >= pb_dmab", medians["only_pb"] >= medians["pb_dmab"], _medians_text(medians))


def test_a4_pb_dmab_not_faster_than_hypergo(check, a4_matrix):
    medians, _ = a4_matrix
    assert check("A4", "pb_dmab >= hypergo", medians["pb_dmab"] >= medians["hypergo"], _medians_text(medians))


def test_a4_hypergo_best_overall(check, a4_matrix):
    medians, elapsed = a4_matrix
    best = min(medians, key=medians.get)
    check("A4", "runtime < 5 min", elapsed < 300, f"{elapsed:.1f}s")
    assert check("A4", "hypergo has the lowest median", best == "hypergo", _medians_text(medians))
    assert elapsed < 300


def test_a4_solver_matters_only_with_magic_branches(check):
    same_h0 = []
    for gseed in range(3):
        prog = random_cfg(60, gseed, 0.0)
        for r in range(3):
            a = Campaign(prog, _a4_cfg("pb_dmab", r)).run().summary()["ttr"]
            b = Campaign(prog, _a4_cfg("hypergo", r)).run().summary()["ttr"]
            same_h0.append(a == b)
    differs_h5 = 0
    for gseed in range(3):
        prog = random_cfg(60, gseed, 0.5)
        for r in range(3):
            a = Campaign(prog, _a4_cfg("pb_dmab", r)).run().summary()["ttr"]
            b = Campaign(prog, _a4_cfg("hypergo", r)).run().summary()["ttr"]
            differs_h5 += a != b
    ok = all(same_h0) and differs_h5 > 0
    assert check("A4", "hypergo differs from pb_dmab only with magic branches", ok,
                 f"hardness0 identical {sum(same_h0)}/{len(same_h0)}, hardness0.5 differing {differs_h5}/9")


def test_a4_null_solver_is_event_identical_to_pb_dmab(check):
    same = []
    for gseed in range(3):
        prog = random_cfg(60, gseed, 0.5)
        for r in range(2):
            a = Campaign(prog, _a4_cfg("pb_dmab", r)).run().events_jsonl()
            b = Campaign(prog, _a4_cfg("hypergo", r, solver="null")).run().events_jsonl()
            same.append(a == b)
    assert check("A4", "hypergo+null solver == pb_dmab event-for-event", all(same),
                 f"{sum(same)}/{len(same)} identical")


# -- A5: solver hygiene ---------------------------------------------------------

# A guard the solver cannot handle but fuzzing hits often, so it gets marked
# unsolvable and later shows up as a taken prefix branch of new seeds.
HOSTILE = {
    "name": "hostile",
    "entry": 0,
    "targets": [4],
    "blocks": [{"id": i, "label": lab} for i, lab in enumerate(["A", "B", "C", "D", "T", "X", "U"])],
    "branches": [
        [0, 1, {"pred": {"byte": 0, "op": "range", "val": [0, 31]}, "solvable": False, "solve_cost_s": 1.0}],
        [0, 6, {"pred": {"byte": 2, "op": "lt", "val": 64}}],
        [0, 5, {}],
        [1, 2, {"pred": {"byte": 3, "op": "eq", "val": 66}, "solve_cost_s": 0.1}],
        [1, 3, {}],
        [2, 4, {}],
    ],
    "seeds": ["80808000"],
}


def _hygiene(prog, events):
    """(calls, unreachable violations, ancestor violations, replay misses)."""
    d = compute_bb_distance(prog.graph)
    traces = {}
    unsolvable = set()
    calls = bad_unreach = bad_ancestor = bad_replay = 0
    for e in events:
        p = e.payload
        if e.kind == "SEED_ADMITTED":
            traces[p["seed"]] = TraceView.from_blocks(p["trace"])
        elif e.kind == "SOLVE_ATTEMPT":
            calls += 1
            br = tuple(p["branch"])
            if d[br[1]] is UNREACHABLE:
                bad_unreach += 1
            trace = traces[p["seed"]]
            chain = trace.branches[:trace.blocks.index(br[0])]
            if br in unsolvable or any(c in unsolvable for c in chain):
                bad_ancestor += 1
            if p["unsolvable"]:
                unsolvable.add(br)
            if p["verdict"] == "SOLVED":
                if br not in prog.execute(bytes.fromhex(p["input"])).branches:
                    bad_replay += 1
    return calls, bad_unreach, bad_ancestor, bad_replay


def test_a5_osec_hygiene(check):
    hostile = load_program(HOSTILE)
    runs = [(hostile, CampaignConfig(scheduler="hypergo", rng_seed=r, budget=5.0, osec_interval=1,
                                     policy=BudgetPolicy(0.5, 0.5, 1.0))) for r in range(3)]
    runs += [(fig1(), CampaignConfig(scheduler="hypergo", rng_seed=r, budget=60.0, refresh_interval=1.0))
             for r in range(3)]
    runs += [(mini_record_parser(), CampaignConfig(scheduler="hypergo", rng_seed=r, budget=30.0,
                                                   refresh_interval=1.0, policy=BudgetPolicy(0.5, 90.0, 6.0)))
             for r in range(2)]
    runs += [(random_cfg(60, g, h), _a4_cfg("hypergo", g)) for g in range(4) for h in (0.5, 0.9)]
    totals = [0, 0, 0, 0]
    kinds = {"unreachable": 0, "unsolvable": 0}
    solved = 0
    for prog, cfg in runs:
        c = Campaign(prog, cfg).run()
        for i, v in enumerate(_hygiene(prog, c.events)):
            totals[i] += v
        for e in c.events:
            if e.kind == "BRANCH_PRUNED":
                kinds[e.payload["reason"]] += 1
            elif e.kind == "SOLVE_ATTEMPT" and e.payload["verdict"] == "SOLVED":
                solved += 1
    calls, bad_unreach, bad_ancestor, bad_replay = totals
    exercised = calls > 0 and solved > 0 and kinds["unreachable"] > 0 and kinds["unsolvable"] > 0
    detail = (f"{calls} calls, {solved} solved, pruned unreachable={kinds['unreachable']} "
              f"unsolvable={kinds['unsolvable']}")
    check("A5", "hygiene scenarios exercised", exercised, detail)
    check("A5", "no solver call on unreachable branches", bad_unreach == 0, f"{bad_unreach} violations")
    check("A5", "no solver call below an unsolvable ancestor", bad_ancestor == 0, f"{bad_ancestor} violations")
    check("A5", "solved inputs cover their flipped branch", bad_replay == 0, f"{bad_replay} misses")
    assert exercised and bad_unreach == bad_ancestor == bad_replay == 0


# -- A6: determinism -------------------------------------------------------------


def _digest(text):
    return hashlib.sha256(text.encode()).hexdigest()


def test_a6_identical_configs_give_identical_logs(check):
    progs = [fig1(), fig3(), mini_record_parser(), random_cfg(60, 3, 0.5)]
    mismatched = []
    for prog in progs:
        for sched in ("distance_only", "aflgo_like", "only_pb", "pb_dmab", "hypergo"):
            cfg = dict(scheduler=sched, rng_seed=99, budget=5.0, refresh_interval=1.0,
                       policy=BudgetPolicy(0.5, 90.0, 6.0))
            a = Campaign(prog, CampaignConfig(**cfg)).run().events_jsonl()
            b = Campaign(prog, CampaignConfig(**cfg)).run().events_jsonl()
            if _digest(a) != _digest(b):
                mismatched.append(f"{prog.name}/{sched}")
    assert check("A6", "in-process logs hash-identical (4 programs x 5 schedulers)", not mismatched,
                 ", ".join(mismatched))


def test_a6_cli_runs_hash_identical(check, tmp_path):
    digests = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        rc = cli_main(["run", "--program", "fig1", "--scheduler", "hypergo", "--rng-seed", "5",
                       "--budget", "30", "--refresh-interval", "1", "--out", str(out)])
        assert rc == 0
        digests.append(hashlib.sha256((out / "events.jsonl").read_bytes()).hexdigest())
    other = tmp_path / "other"
    cli_main(["run", "--program", "fig1", "--scheduler", "hypergo", "--rng-seed", "6",
              "--budget", "30", "--refresh-interval", "1", "--out", str(other)])
    differ = hashlib.sha256((other / "events.jsonl").read_bytes()).hexdigest() != digests[0]
    ok = digests[0] == digests[1] and differ
    assert check("A6", "events.jsonl sha256 equal across CLI runs", ok, digests[0][:16])


# -- A7: statistics --------------------------------------------------------------


def test_a7_a12_identities(check):
    rng = random.Random(3)
    worst = 0.0
    ident = True
    for _ in range(500):
        a = [rng.randint(0, 10) for _ in range(rng.randint(1, 12))]
        b = [rng.randint(0, 10) for _ in range(rng.randint(1, 12))]
        worst = max(worst, abs(vargha_delaney_a12(a, b) + vargha_delaney_a12(b, a) - 1))
        ident &= vargha_delaney_a12(a, list(a)) == 0.5
    ok = worst <= TOL and ident
    assert check("A7", "A12(a,b)+A12(b,a)=1 and A12(a,a)=0.5", ok, f"max deviation {worst:.1e}")


def _num(x):
    return float(x) if x not in ("", None) else None


def test_a7_stats_csv_recomputes_from_ttr_csv(check, tmp_path):
    out = tmp_path / "cmp"
    rc = cli_main(["compare", "--program", "fig1", "--program", "fig3",
                   "--schedulers", "distance_only,only_pb,hypergo", "--reps", "5",
                   "--budget", "20", "--refresh-interval", "1", "--out", str(out)])
    assert rc == 0
    ttr_rows = read_ttr_csv(out / "ttr.csv")
    groups = {}
    for row in ttr_rows:
        t = _num(row["ttr"])
        v = 1.25 * float(row["budget"]) if t is None else t
        groups.setdefault((row["fixture"], row["target"], row["scheduler"]), []).append(v)
    stats_rows = read_ttr_csv(out / "stats.csv")
    bad = []
    for row in stats_rows:
        base = groups[(row["fixture"], row["target"], row["baseline"])]
        treat = groups[(row["fixture"], row["target"], row["treatment"])]
        mb, mt = statistics.median(base), statistics.median(treat)
        gt = sum(x > y for x in base for y in treat)
        eq = sum(x == y for x in base for y in treat)
        want = {
            "median_baseline": mb,
            "median_treatment": mt,
            "speedup": mb / mt if mt > 0 else math.inf,
            "mean_baseline": sum(base) / len(base),
            "mean_treatment": sum(treat) / len(treat),
            "a12": (gt + 0.5 * eq) / (len(base) * len(treat)),
            "p_value": mann_whitney(base, treat)[1],
            "n_baseline": len(base),
            "n_treatment": len(treat),
        }
        for k, v in want.items():
            if abs(float(row[k]) - v) > TOL * max(1.0, abs(v)):
                bad.append(f"{row['fixture']}/{row['target']}/{row['baseline']}:{k}")
    expected_rows = 2 * len({(f, t) for f, t, _ in groups})
    ok = not bad and len(stats_rows) == expected_rows
    keys = [(r["fixture"], r["target"], r["baseline"]) for r in stats_rows]
    ok &= keys == sorted(keys)
    assert check("A7", "stats.csv == recomputation from ttr.csv", ok,
                 f"{len(stats_rows)} rows, mismatches: {bad[:3]}")
