"""Command-line front end: run, compare, analyze, replay, fixture."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .campaign import SCHEDULERS, SOLVERS, Campaign, CampaignConfig, ConfigError
from .fixtures import resolve_program
from .osec import BudgetPolicy
from .program import UNREACHABLE, GraphError, compute_bb_distance, sibling_groups
from .stats import STATS_COLUMNS, comparison_rows

TTR_COLUMNS = ["fixture", "target", "scheduler", "rep", "rng_seed", "budget", "ttr"]


class UsageError(Exception):
    pass


def _load(source: str):
    try:
        return resolve_program(source)
    except FileNotFoundError:
        raise UsageError(f"no such program file: {source}") from None
    except (GraphError, ValueError, KeyError) as exc:
        raise UsageError(f"bad program {source!r}: {exc}") from None


def _config(args, scheduler: str, rng_seed: int) -> CampaignConfig:
    try:
        return CampaignConfig(
            scheduler=scheduler,
            rng_seed=rng_seed,
            budget=args.budget,
            refresh_interval=args.refresh_interval,
            osec_interval=args.osec_interval,
            solver=args.solver,
            policy=BudgetPolicy(args.budget_lower, args.budget_upper, args.budget_increment),
        )
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _write_run(out: Path, campaign: Campaign) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(campaign.events_jsonl(), encoding="utf-8")
    summary = campaign.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def cmd_run(args) -> int:
    prog = _load(args.program)
    cfg = _config(args, args.scheduler, args.rng_seed)
    campaign = Campaign(prog, cfg).run()
    summary = _write_run(Path(args.out), campaign)
    print(json.dumps(summary["ttr"], sort_keys=True))
    return 0


def _arm_labels(schedulers) -> list:
    """Scheduler names, with repeats suffixed ``#2``, ``#3``... so each arm stays separate."""
    seen: dict = {}
    labels = []
    for s in schedulers:
        seen[s] = seen.get(s, 0) + 1
        labels.append(s if seen[s] == 1 else f"{s}#{seen[s]}")
    return labels


def _one_run(job) -> dict:
    source, scheduler, label, rep, seed, args = job
    prog = resolve_program(source)
    campaign = Campaign(prog, _config(args, scheduler, seed)).run()
    if args.keep_runs:
        _write_run(Path(args.out) / "runs" / f"{Path(source).stem}-{label}-{rep}", campaign)
    summary = campaign.summary()
    return [
        {"fixture": source, "target": target, "scheduler": label, "rep": rep,
         "rng_seed": seed, "budget": args.budget, "ttr": ttr}
        for target, ttr in summary["ttr"].items()
    ]


def cmd_compare(args) -> int:
    schedulers = [s for part in args.schedulers for s in part.split(",") if s]
    if len(schedulers) < 2:
        raise UsageError("compare needs ≥2 schedulers")
    for s in schedulers:
        if s not in SCHEDULERS:
            raise UsageError(f"unknown scheduler {s!r}")
    if args.reps < 1:
        raise UsageError("repetitions must be ≥ 1")
    for source in args.program:
        _load(source)
        _config(args, schedulers[0], args.rng_seed)
    labels = _arm_labels(schedulers)
    jobs = [(source, sched, label, rep, args.rng_seed + rep, args)
            for source in args.program for sched, label in zip(schedulers, labels)
            for rep in range(args.reps)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    rows = sorted((r for batch in results for r in batch),
                  key=lambda r: (r["fixture"], r["target"], r["scheduler"], r["rep"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ttr.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, TTR_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({**r, "ttr": "" if r["ttr"] is None else repr(r["ttr"])})
    stats = comparison_rows(rows, treatment=labels[-1])
    write_stats(out / "stats.csv", stats)
    for r in stats:
        print(f"{r['fixture']} {r['target']} {r['baseline']} vs {r['treatment']}: "
              f"speedup {r['speedup']:.3f} p={r['p_value']:.4f} A12={r['a12']:.3f}")
    return 0


def write_stats(path: Path, stats) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, STATS_COLUMNS)
        w.writeheader()
        for r in sorted(stats, key=lambda r: (r["fixture"], r["target"], r["baseline"])):
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def read_ttr_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_analyze(args) -> int:
    prog = _load(args.program)
    g = prog.graph
    w = csv.writer(sys.stdout, lineterminator="\n")
    if args.groups:
        w.writerow(["block", "branches"])
        for grp in sibling_groups(g):
            w.writerow([g.label(grp.src), len(grp.members)])
        return 0
    d = compute_bb_distance(g)
    w.writerow(["block", "distance"])
    for b in g.blocks:
        w.writerow([g.label(b), "UNREACHABLE" if d[b] is UNREACHABLE else repr(d[b])])
    return 0


def cmd_replay(args) -> int:
    prog = _load(args.program)
    bad = checked = 0
    with open(args.events, encoding="utf-8") as fh:
        for line in fh:
            ev = json.loads(line)
            if ev["kind"] != "SEED_ADMITTED":
                continue
            p = ev["payload"]
            trace = prog.execute(bytes.fromhex(p["input"]))
            checked += 1
            if list(trace.blocks) != p["trace"]:
                bad += 1
                print(f"seed {p['seed']}: trace mismatch", file=sys.stderr)
    print(f"replayed {checked} seeds, {bad} mismatches")
    return 1 if bad else 0


def cmd_fixture(args) -> int:
    prog = _load(args.name)
    if not hasattr(prog, "to_document"):
        raise UsageError(f"{args.name} is a coded target and has no document form")
    text = json.dumps(prog.to_document(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=float, default=3600.0, help="logical seconds")
    p.add_argument("--refresh-interval", type=float, default=60.0)
    p.add_argument("--osec-interval", type=int, default=1000, help="fuzz executions per solver step")
    p.add_argument("--solver", choices=SOLVERS, default="simulated")
    p.add_argument("--budget-lower", type=float, default=5.0)
    p.add_argument("--budget-upper", type=float, default=900.0)
    p.add_argument("--budget-increment", type=float, default=60.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirfuzz", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run one campaign")
    p.add_argument("--program", required=True, help="JSON file or builtin (fig1, fig3, tlv, random:N:SEED:HARDNESS)")
    p.add_argument("--scheduler", default="hypergo")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _campaign_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a scheduler matrix and write ttr.csv / stats.csv")
    p.add_argument("--program", action="append", required=True)
    p.add_argument("--schedulers", action="append", required=True,
                   help="comma separated; the last one is the treatment")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--rng-seed", type=int, default=0, help="run i uses seed + i")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--keep-runs", action="store_true")
    p.add_argument("--out", required=True)
    _campaign_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze", help="print BB distances (or sibling groups) as CSV")
    p.add_argument("--program", required=True)
    p.add_argument("--groups", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("replay", help="re-execute admitted seeds and compare traces")
    p.add_argument("--program", required=True)
    p.add_argument("--events", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("fixture", help="dump a builtin program document")
    p.add_argument("name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fixture)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "scheduler", None) is not None and args.scheduler not in SCHEDULERS:
        print(f"dirfuzz: unknown scheduler {args.scheduler!r}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dirfuzz: {exc}", file=sys.stderr)
        return 2
